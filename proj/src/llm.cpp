#include "labelrefine/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "labelrefine/metrics.hpp"

namespace labelrefine {

using json = nlohmann::json;

const std::string_view kOutputFormatInstruction =
    "Respond with exactly one JSON object and nothing else, in the form "
    "{\"intent\": \"AS|HL|OT\", \"topic\": \"C|P\", \"followup\": \"E|EA|S\"}.";

void ClassifierConfig::validate() const {
    if (temperature < 0.0) throw ConfigError("classifier temperature must be >= 0");
    if (max_retries < 0) throw ConfigError("classifier max_retries must be >= 0");
    if (parallelism < 1) throw ConfigError("classifier parallelism must be >= 1");
    if (max_output_tokens < 1) throw ConfigError("classifier max_output_tokens must be >= 1");
    if (timeout_seconds <= 0.0) throw ConfigError("classifier timeout must be positive");
}

std::string render_transcript(const Session& s) {
    std::string out = "Session: " + s.id + "\n";
    for (const Exchange& e : s.exchanges) {
        out += e.role == Role::student ? "Student: " : "Tutor: ";
        out += e.text;
        out += '\n';
    }
    return out;
}

ChatRequest compose_classifier_request(const ClassifierConfig& cfg, const PromptVersion& prompt, const Session& s) {
    ChatRequest req;
    req.model = cfg.model;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_output_tokens;
    req.messages.push_back({"system", prompt.body + "\n\n" + std::string(kOutputFormatInstruction)});
    req.messages.push_back({"user", render_transcript(s)});
    return req;
}

namespace {

std::string normalized_code(const json& v) {
    if (!v.is_string()) return {};
    std::string s = v.get<std::string>();
    auto first = s.find_first_not_of(" \t\r\n");
    auto last = s.find_last_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    s = s.substr(first, last - first + 1);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

/// End offset (exclusive) of the balanced {...} starting at `open`, or npos.
std::size_t object_end(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

}  // namespace

ParsedLabels parse_labels(std::string_view raw) {
    std::string first_problem;
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
        const std::size_t end = object_end(raw, pos);
        if (end == std::string_view::npos) continue;
        json obj = json::parse(raw.substr(pos, end - pos), nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) continue;
        if (!obj.contains("intent") || !obj.contains("topic") || !obj.contains("followup")) {
            if (first_problem.empty()) first_problem = "JSON object lacks intent/topic/followup keys";
            continue;
        }
        try {
            return LabelSet{parse_intent(normalized_code(obj["intent"])), parse_topic(normalized_code(obj["topic"])),
                            parse_followup(normalized_code(obj["followup"]))};
        } catch (const SchemaError& e) {
            if (first_problem.empty()) first_problem = e.what();
        }
    }
    return ParseFailure{first_problem.empty() ? "no JSON object" : first_problem};
}

Prediction classify_session(ChatBackend& backend, const ClassifierConfig& cfg, const PromptVersion& prompt,
                            const Session& s) {
    ChatResponse reply = backend.complete(compose_classifier_request(cfg, prompt, s));
    return Prediction{s.id, parse_labels(reply.text), std::move(reply.text), reply.usage};
}

std::vector<Prediction> classify_all(ChatBackend& backend, const ClassifierConfig& cfg, const PromptVersion& prompt,
                                     std::span<const Session> sessions, const ClassificationObserver& observer) {
    std::vector<Prediction> results(sessions.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < sessions.size() && !failed; i = next++) {
            try {
                results[i] = classify_session(backend, cfg, prompt, sessions[i]);
                if (observer) observer(sessions[i], results[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.parallelism, 1)),
                                                      sessions.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    std::sort(results.begin(), results.end(),
              [](const Prediction& a, const Prediction& b) { return a.session_id < b.session_id; });
    return results;
}

namespace {

std::string between(std::string_view text, std::string_view open, std::string_view close) {
    auto a = text.find(open);
    if (a == std::string_view::npos) return {};
    a += open.size();
    auto b = text.find(close, a);
    if (b == std::string_view::npos) return {};
    std::string s(text.substr(a, b - a));
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

}  // namespace

ChatRequest LlmAgent::compose(const AgentContext& ctx) const {
    std::ostringstream user;
    user << "# Current labeling prompt (v" << ctx.current.version << ")\n<current_prompt>\n"
         << ctx.current.body << "\n</current_prompt>\n\n# Codebook\n";
    for (const auto& [dim, defs] : ctx.codebook) {
        user << "## " << to_string(dim) << "\n";
        for (const auto& [code, text] : defs) user << "- " << code << ": " << text << "\n";
    }
    user << "\n# Kappa history\n";
    for (const HistoryEntry& h : ctx.history) {
        user << "v" << h.version << ": overall " << format_fixed(h.overall_kappa, 3);
        for (const auto& [dim, k] : h.per_dimension_kappa) user << ", " << to_string(dim) << " " << format_fixed(k, 3);
        user << "\n";
    }
    const Dimension low = ctx.report.lowest_kappa_dimension;
    user << "\n# Lowest-kappa dimension: " << to_string(low) << "\n";
    if (auto it = ctx.report.groups.find(low); it != ctx.report.groups.end()) {
        for (const DisagreementGroup& g : it->second) {
            user << "## predicted " << g.predicted << ", gold " << g.gold << " (" << g.count << " sessions)\n";
            for (const std::string& ex : g.excerpts) user << "> " << ex << "\n";
        }
    }
    if (!ctx.veto_notes.empty()) {
        user << "\n# Reviewer vetoed earlier proposals in this iteration\n";
        for (const std::string& note : ctx.veto_notes) user << "- " << note << "\n";
    }
    user << "\n# Reply format\n<changelog>one-paragraph summary of edits</changelog>\n"
         << "<reasoning>your analysis of the disagreements</reasoning>\n"
         << "<prompt>the complete revised prompt</prompt>\n";

    ChatRequest req;
    req.model = cfg_.model;
    req.temperature = cfg_.temperature;
    req.max_tokens = cfg_.max_output_tokens;
    req.messages.push_back({"system", cfg_.instruction});
    req.messages.push_back({"user", user.str()});
    return req;
}

ProposedRevision LlmAgent::parse_reply(const ChatResponse& reply, const PromptVersion& base) {
    ProposedRevision r;
    r.base_version = base.version;
    r.new_body = between(reply.text, "<prompt>", "</prompt>");
    r.changelog = between(reply.text, "<changelog>", "</changelog>");
    r.reasoning = between(reply.text, "<reasoning>", "</reasoning>");
    r.usage = reply.usage;
    if (r.new_body.empty()) throw NoUsableRevision("agent reply has no <prompt> block");
    if (r.changelog.empty()) r.changelog = "(no changelog given)";
    return r;
}

ProposedRevision LlmAgent::propose(const AgentContext& ctx) {
    return parse_reply(backend_.complete(compose(ctx)), ctx.current);
}

ProposedRevision propose_revision(Agent& agent, const AgentContext& ctx) {
    if (ctx.report.total() == 0) throw InvalidArgument("propose_revision needs a non-empty disagreement report");
    ProposedRevision r = agent.propose(ctx);
    if (r.new_body.empty()) throw NoUsableRevision("agent returned an empty prompt");
    if (r.new_body == ctx.current.body) throw NoUsableRevision("agent returned the prompt unchanged");
    r.base_version = ctx.current.version;
    return r;
}

void check_prices(const PriceTable& prices) {
    for (const auto& [model, p] : prices)
        if (p.usd_per_million_input < 0 || p.usd_per_million_output < 0)
            throw ConfigError("negative price for model '" + model + "'");
}

double estimate_cost(const TokenUsage& total, const std::string& model, const PriceTable& prices) {
    auto it = prices.find(model);
    if (it == prices.end()) throw NotFound("no price for model '" + model + "'");
    return (static_cast<double>(total.input_tokens) * it->second.usd_per_million_input +
            static_cast<double>(total.output_tokens) * it->second.usd_per_million_output) /
           1e6;
}

double estimate_cost(std::span<const TokenUsage> usages, const std::string& model, const PriceTable& prices) {
    TokenUsage total;
    for (const TokenUsage& u : usages) total += u;
    return estimate_cost(total, model, prices);
}

}  // namespace labelrefine
