#pragma once

// Deterministic stand-ins for the classifier and the agent. Both are pure
// functions of their seed and inputs, so repeated runs are byte-identical.

#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "labelrefine/llm.hpp"

namespace labelrefine {

struct MockClassifierOptions {
    std::uint64_t seed = 1;
    /// Accuracy for a marker class whose rule token appears in the prompt.
    double rule_accuracy = 0.97;
    /// Forces every prediction to be correct (markers still decide labels).
    bool perfect = false;
    /// Sessions for which the backend emits prose instead of JSON.
    std::set<std::string> unparseable_ids;
    TokenUsage usage_per_call{2000, 200};
};

/// Chat backend emulating a labeling model. It reads the rule tokens in the
/// system prompt and the marker phrases in the student lines of the
/// transcript; each (session, dimension) gets a fixed uniform draw compared
/// against the marker class accuracy, so adding a rule only turns wrong
/// answers into right ones.
class MockClassifierBackend : public ChatBackend {
public:
    explicit MockClassifierBackend(MockClassifierOptions opts = {}) : opts_(std::move(opts)) {}
    ChatResponse complete(const ChatRequest& request) override;

    const MockClassifierOptions& options() const { return opts_; }

private:
    MockClassifierOptions opts_;
};

struct ScriptedRule {
    std::string token;  // appears in the prompt as "[RULE <token>]"
    std::string name;
    std::optional<Dimension> target;
    std::string text;
};

/// Rules addressing the catalog's hard marker classes, followed by two
/// rules with no effect on the mock classifier.
const std::vector<ScriptedRule>& default_rule_script();

std::string rule_marker(const std::string& token);

/// Mock agent: appends the next unused scripted rule, preferring one aimed at
/// the lowest-kappa dimension. Rules named (by token or name) in veto notes
/// are skipped; when
/// no rule is left it throws NoUsableRevision.
class ScriptedAgent : public Agent {
public:
    explicit ScriptedAgent(std::vector<ScriptedRule> script = default_rule_script(),
                           TokenUsage usage_per_call = {6000, 800})
        : script_(std::move(script)), usage_(usage_per_call) {}

    ProposedRevision propose(const AgentContext& ctx) override;

private:
    std::vector<ScriptedRule> script_;
    TokenUsage usage_;
};

/// Decorator recording which sessions were classified, tagged by phase.
class RecordingBackend : public ChatBackend {
public:
    explicit RecordingBackend(ChatBackend& inner) : inner_(inner) {}
    ChatResponse complete(const ChatRequest& request) override;

    void set_phase(std::string phase);
    struct Entry {
        std::string phase;
        std::string session_id;
    };
    std::vector<Entry> entries() const;

private:
    ChatBackend& inner_;
    mutable std::mutex mutex_;
    std::string phase_;
    std::vector<Entry> entries_;
};

/// Session id from a transcript produced by render_transcript.
std::string transcript_session_id(const std::string& transcript);

}  // namespace labelrefine
