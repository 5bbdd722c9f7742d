#pragma once

// Command-line front end. Exit codes: 0 success, 1 configuration or usage
// error, 2 runtime abort (transport failure, I/O, undefined statistics).

#include <iosfwd>
#include <string>
#include <vector>

namespace labelrefine {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);
int run_cli(int argc, char** argv);

}  // namespace labelrefine
