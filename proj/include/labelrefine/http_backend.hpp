#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelrefine/llm.hpp"

namespace labelrefine {

/// Generic JSON-over-HTTP chat completion. Vendor differences live in the
/// header and body templates plus the JSON pointers used to read the reply.
///
/// Template placeholders: string values "{{messages}}" and
/// "{{messages_no_system}}" become message arrays, "{{temperature}}" and
/// "{{max_tokens}}" become numbers; "{{model}}", "{{system}}" and "{{user}}"
/// are substituted inside strings. Header values and the URL expand
/// "${ENV_VAR}" from the environment.
struct HttpBackendConfig {
    std::string url;
    std::map<std::string, std::string> headers;
    nlohmann::json body_template;
    std::string text_pointer = "/choices/0/message/content";
    std::string input_tokens_pointer = "/usage/prompt_tokens";
    std::string output_tokens_pointer = "/usage/completion_tokens";
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int backoff_initial_ms = 500;
    double backoff_factor = 2.0;
    bool debug = false;

    /// "openai", "anthropic" or "gemini"; `key_env` names the API-key variable.
    static HttpBackendConfig preset(const std::string& name, const std::string& key_env);
};

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig cfg);
    ChatResponse complete(const ChatRequest& request) override;

    nlohmann::json render_body(const ChatRequest& request) const;

private:
    HttpBackendConfig cfg_;
};

/// Process-wide count of outgoing HTTP attempts.
std::uint64_t http_request_count();

/// Replaces every "${NAME}" with the environment value (empty if unset).
std::string expand_env(const std::string& text);

/// Masks each secret occurrence in text.
std::string redact(std::string text, const std::vector<std::string>& secrets);

}  // namespace labelrefine
