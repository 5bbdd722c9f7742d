#include "labelrefine/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace labelrefine {

using json = nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_requests{0};

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /... (with query)
};

ParsedUrl split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("invalid endpoint URL '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

bool retriable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::uint64_t http_request_count() { return g_requests.load(); }

std::string expand_env(const std::string& text) {
    static const std::regex re(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::string out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        out += text.substr(last, static_cast<std::size_t>(it->position()) - last);
        const char* v = std::getenv((*it)[1].str().c_str());
        out += v ? v : "";
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out += text.substr(last);
    return out;
}

std::string redact(std::string text, const std::vector<std::string>& secrets) {
    for (const std::string& s : secrets)
        if (!s.empty()) replace_all(text, s, "***");
    return text;
}

HttpBackendConfig HttpBackendConfig::preset(const std::string& name, const std::string& key_env) {
    HttpBackendConfig c;
    const std::string key = "${" + key_env + "}";
    if (name == "openai") {
        c.url = "https://api.openai.com/v1/chat/completions";
        c.headers["Authorization"] = "Bearer " + key;
        c.body_template = {{"model", "{{model}}"},
                           {"messages", "{{messages}}"},
                           {"temperature", "{{temperature}}"},
                           {"max_completion_tokens", "{{max_tokens}}"}};
    } else if (name == "anthropic") {
        c.url = "https://api.anthropic.com/v1/messages";
        c.headers["x-api-key"] = key;
        c.headers["anthropic-version"] = "2023-06-01";
        c.body_template = {{"model", "{{model}}"},
                           {"system", "{{system}}"},
                           {"messages", "{{messages_no_system}}"},
                           {"temperature", "{{temperature}}"},
                           {"max_tokens", "{{max_tokens}}"}};
        c.text_pointer = "/content/0/text";
        c.input_tokens_pointer = "/usage/input_tokens";
        c.output_tokens_pointer = "/usage/output_tokens";
    } else if (name == "gemini") {
        c.url = "https://generativelanguage.googleapis.com/v1beta/models/{{model}}:generateContent";
        c.headers["x-goog-api-key"] = key;
        c.body_template = {
            {"systemInstruction", {{"parts", json::array({{{"text", "{{system}}"}}})}}},
            {"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", "{{user}}"}}})}}})},
            {"generationConfig", {{"temperature", "{{temperature}}"}, {"maxOutputTokens", "{{max_tokens}}"}}}};
        c.text_pointer = "/candidates/0/content/parts/0/text";
        c.input_tokens_pointer = "/usageMetadata/promptTokenCount";
        c.output_tokens_pointer = "/usageMetadata/candidatesTokenCount";
    } else {
        throw ConfigError("unknown provider preset '" + name + "'");
    }
    return c;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    split_url(cfg_.url);
    if (cfg_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

json HttpChatBackend::render_body(const ChatRequest& request) const {
    std::string system, user;
    json all = json::array(), no_system = json::array();
    for (const ChatMessage& m : request.messages) {
        all.push_back({{"role", m.role}, {"content", m.content}});
        if (m.role == "system") {
            system += (system.empty() ? "" : "\n\n") + m.content;
        } else {
            no_system.push_back({{"role", m.role}, {"content", m.content}});
            if (m.role == "user") user += (user.empty() ? "" : "\n\n") + m.content;
        }
    }
    std::function<json(const json&)> fill = [&](const json& node) -> json {
        if (node.is_object()) {
            json out = json::object();
            for (const auto& [k, v] : node.items()) out[k] = fill(v);
            return out;
        }
        if (node.is_array()) {
            json out = json::array();
            for (const auto& v : node) out.push_back(fill(v));
            return out;
        }
        if (!node.is_string()) return node;
        const std::string s = node.get<std::string>();
        if (s == "{{messages}}") return all;
        if (s == "{{messages_no_system}}") return no_system;
        if (s == "{{temperature}}") return request.temperature;
        if (s == "{{max_tokens}}") return request.max_tokens;
        std::string out = s;
        replace_all(out, "{{model}}", request.model);
        replace_all(out, "{{system}}", system);
        replace_all(out, "{{user}}", user);
        return out;
    };
    return fill(cfg_.body_template);
}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    std::string url = cfg_.url;
    replace_all(url, "{{model}}", request.model);
    const ParsedUrl target = split_url(expand_env(url));
    httplib::Headers headers;
    std::vector<std::string> secrets;
    for (const auto& [k, v] : cfg_.headers) {
        const std::string value = expand_env(v);
        headers.emplace(k, value);
        if (value != v) secrets.push_back(value.substr(value.find_last_of(' ') + 1));
    }
    const std::string body = render_body(request).dump();
    if (cfg_.debug) spdlog::debug("POST {}{} {}", target.base, target.path, redact(body, secrets));

    std::string last_error;
    int delay_ms = cfg_.backoff_initial_ms;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = static_cast<int>(std::lround(delay_ms * cfg_.backoff_factor));
        }
        ++g_requests;
        httplib::Client client(target.base);
        const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
        const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(target.path, headers, body, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            spdlog::warn("{} (attempt {}/{})", last_error, attempt + 1, cfg_.max_retries + 1);
            continue;
        }
        if (cfg_.debug) spdlog::debug("response {} {}", res->status, redact(res->body, secrets));
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status) + ": " + redact(res->body.substr(0, 200), secrets);
            if (!retriable_status(res->status)) throw TransportError(last_error);
            spdlog::warn("{} (attempt {}/{})", last_error, attempt + 1, cfg_.max_retries + 1);
            continue;
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded()) throw TransportError("response body is not JSON");
        ChatResponse out;
        const json::json_pointer text_ptr(cfg_.text_pointer);
        if (!reply.contains(text_ptr) || !reply[text_ptr].is_string())
            throw TransportError("response lacks text at " + cfg_.text_pointer);
        out.text = reply[text_ptr].get<std::string>();
        const json::json_pointer in_ptr(cfg_.input_tokens_pointer), out_ptr(cfg_.output_tokens_pointer);
        if (reply.contains(in_ptr) && reply[in_ptr].is_number_integer())
            out.usage.input_tokens = reply[in_ptr].get<std::int64_t>();
        if (reply.contains(out_ptr) && reply[out_ptr].is_number_integer())
            out.usage.output_tokens = reply[out_ptr].get<std::int64_t>();
        return out;
    }
    throw TransportError(last_error.empty() ? "request failed" : last_error);
}

}  // namespace labelrefine
