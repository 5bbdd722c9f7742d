#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labelrefine {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A value that does not belong to a fixed enumeration or schema.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    /// 1-based line number in the source file, 0 when not file-backed.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Cohen's kappa is undefined because expected agreement equals one.
class UndefinedKappa : public Error {
public:
    using Error::Error;
};

/// Network or remote-service failure after retries were exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Conflict : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace labelrefine
