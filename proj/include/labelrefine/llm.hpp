#pragma once

// The two LLM roles: a classifier that labels one session under a prompt,
// and an agent that proposes a prompt revision from disagreement evidence.

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelrefine/disagreement.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/model.hpp"

namespace labelrefine {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 256;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
};

/// One chat-completion round trip. Implementations throw TransportError
/// once their own retry budget is spent; they must be safe to call from
/// several threads at once.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct ClassifierConfig {
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 256;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int parallelism = 4;

    void validate() const;
};

/// Output contract appended to every classifier call.
extern const std::string_view kOutputFormatInstruction;

/// "Session: <id>" header followed by one "Student:"/"Tutor:" line per exchange.
std::string render_transcript(const Session& s);

ChatRequest compose_classifier_request(const ClassifierConfig& cfg, const PromptVersion& prompt, const Session& s);

/// Extracts the first JSON object carrying valid intent/topic/followup codes.
/// Never throws; failures carry a non-empty reason.
ParsedLabels parse_labels(std::string_view raw);

/// Transport errors propagate; unparseable output becomes a ParseFailure.
Prediction classify_session(ChatBackend& backend, const ClassifierConfig& cfg, const PromptVersion& prompt,
                            const Session& s);

/// Called once per classified session, possibly from worker threads.
using ClassificationObserver = std::function<void(const Session&, const Prediction&)>;

/// Classifies every session with up to cfg.parallelism requests in flight.
/// Results come back sorted by session id.
std::vector<Prediction> classify_all(ChatBackend& backend, const ClassifierConfig& cfg, const PromptVersion& prompt,
                                     std::span<const Session> sessions, const ClassificationObserver& observer = {});

struct ProposedRevision {
    int base_version = 0;
    std::string new_body;
    std::string changelog;
    std::string reasoning;
    TokenUsage usage;

    bool operator==(const ProposedRevision&) const = default;
};

struct HistoryEntry {
    int version = 0;
    std::map<Dimension, double> per_dimension_kappa;
    double overall_kappa = 0.0;
};

struct AgentContext {
    PromptVersion current;
    DisagreementReport report;
    Codebook codebook;
    std::vector<HistoryEntry> history;
    /// Reviewer notes from proposals vetoed earlier in this iteration.
    std::vector<std::string> veto_notes;
};

/// The agent could not produce a usable prompt; the iteration is skipped.
class NoUsableRevision : public Error {
public:
    using Error::Error;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual ProposedRevision propose(const AgentContext& ctx) = 0;
};

struct AgentConfig {
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    double timeout_seconds = 300.0;
    int max_retries = 3;
    std::string instruction =
        "Improve the labeling prompt to maximize Cohen's kappa against the human gold labels. Study the "
        "lowest-kappa dimension, find the disagreement patterns behind it, revise the prompt, and document "
        "what you changed and why.";
};

/// Agent backed by a chat model. The reply must contain <changelog>,
/// <reasoning> and <prompt> sections.
class LlmAgent : public Agent {
public:
    LlmAgent(ChatBackend& backend, AgentConfig cfg) : backend_(backend), cfg_(std::move(cfg)) {}
    ProposedRevision propose(const AgentContext& ctx) override;

    ChatRequest compose(const AgentContext& ctx) const;
    static ProposedRevision parse_reply(const ChatResponse& reply, const PromptVersion& base);

private:
    ChatBackend& backend_;
    AgentConfig cfg_;
};

/// Checks the report precondition, asks the agent, and validates the result
/// (non-empty body that differs from the base).
ProposedRevision propose_revision(Agent& agent, const AgentContext& ctx);

struct Price {
    double usd_per_million_input = 0.0;
    double usd_per_million_output = 0.0;
    bool operator==(const Price&) const = default;
};

using PriceTable = std::map<std::string, Price>;

void check_prices(const PriceTable& prices);

/// (sum input * in_price + sum output * out_price) / 1e6. Throws NotFound for
/// an unknown model.
double estimate_cost(std::span<const TokenUsage> usages, const std::string& model, const PriceTable& prices);
double estimate_cost(const TokenUsage& total, const std::string& model, const PriceTable& prices);

}  // namespace labelrefine
