#pragma once

// The refinement loop: evaluate -> analyze -> propose -> review -> apply,
// with plateau stopping, regression detection and best-version selection.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelrefine/dataset.hpp"
#include "labelrefine/disagreement.hpp"
#include "labelrefine/llm.hpp"
#include "labelrefine/metrics.hpp"

namespace labelrefine {

struct StopPolicy {
    double epsilon = 0.02;
    int patience = 2;
    int max_iterations = 10;

    void validate() const;
    bool operator==(const StopPolicy&) const = default;
};

enum class StopReason { plateau, max_iterations, converged, manual, error };
std::string_view to_string(StopReason r);
StopReason parse_stop_reason(std::string_view s);

/// `history` holds overall kappa per evaluated version, oldest first.
/// Plateau: the last `patience` signed deltas are each below epsilon
/// (epsilon = 0 disables it). Max iterations: |history| - 1 >= max_iterations.
std::optional<StopReason> should_stop(std::span<const double> history, const StopPolicy& p);

struct VersionMetrics {
    int version = 0;
    std::map<Dimension, double> per_dimension;
    double overall = 0.0;
};

struct RegressionEvent {
    std::string metric;  // "overall" or a dimension name
    int from_version = 0;
    int to_version = 0;
    double from_value = 0.0;
    double to_value = 0.0;
    double delta = 0.0;

    bool operator==(const RegressionEvent&) const = default;
};

/// One event per (consecutive version pair, metric) whose value fell by more
/// than `threshold`. Drops within 1e-9 of the threshold do not count.
std::vector<RegressionEvent> detect_regressions(std::span<const VersionMetrics> history, double threshold = 0.05);

enum class Decision { approved, vetoed, edited, auto_applied };
std::string_view to_string(Decision d);
Decision parse_decision(std::string_view s);

struct ReviewOutcome {
    Decision decision = Decision::approved;
    std::string note;
    std::optional<std::string> edited_body;
    std::string actor;
    /// Reviewer asked to end the run after this proposal.
    bool stop_run = false;
};

struct ReviewRequest {
    std::string run_id;
    int iteration = 0;
    PromptVersion current;
    ProposedRevision proposal;
    std::string diff;
    const DisagreementReport* report = nullptr;
};

class ReviewGate {
public:
    virtual ~ReviewGate() = default;
    virtual ReviewOutcome decide(const ReviewRequest& request) = 0;
};

struct VetoedAttempt {
    ProposedRevision proposal;
    std::string note;
    std::string actor;
    bool operator==(const VetoedAttempt&) const = default;
};

struct IterationRecord {
    int iteration = 0;
    int prompt_version = 0;
    EvalResult eval;
    /// True when the prompt was unchanged since the previous iteration and its
    /// evaluation was carried over instead of repeated.
    bool eval_reused = false;
    std::optional<DisagreementReport> report;
    std::optional<ProposedRevision> proposal;
    std::optional<Decision> decision;
    std::string decision_note;
    std::string actor;
    std::vector<VetoedAttempt> vetoed_attempts;
    std::optional<int> applied_version;
    std::optional<StopReason> stop_reason;
    std::string started_at;
    std::string finished_at;
    TokenUsage classifier_usage_total;
    TokenUsage agent_usage_total;
    double cumulative_cost = 0.0;

    bool operator==(const IterationRecord&) const = default;
};

struct RunRecord {
    std::string run_id;
    nlohmann::json config;
    std::string dataset_fingerprint;
    std::vector<PromptVersion> versions;
    std::vector<IterationRecord> iterations;
    std::optional<int> best_version;
    std::optional<StopReason> stop_reason;
    std::string error;

    const PromptVersion& version(int v) const;
    /// Per evaluated version, in evaluation order (reused evaluations skipped).
    std::vector<VersionMetrics> version_history() const;
    TokenUsage classifier_usage() const;
    TokenUsage agent_usage() const;
};

/// argmax of overall kappa over evaluated iterations; ties go to the lowest
/// version. Throws InvalidArgument when nothing was evaluated.
int select_best(std::span<const IterationRecord> iterations);
int select_best(const RunRecord& run);

/// Receives run state as it is produced; the store implements it.
class RunSink {
public:
    virtual ~RunSink() = default;
    virtual void on_prompt_version(const PromptVersion& v) = 0;
    virtual void on_iteration(const IterationRecord& rec) = 0;
    virtual void on_finish(const RunRecord& run) = 0;
};

struct ModelRoute {
    std::string classifier_model;
    std::string agent_model;
    PriceTable prices;
};

/// Classifies every session and scores the result. Cost uses the
/// classifier's price entry. Transport errors propagate.
EvalResult evaluate_prompt(const PromptVersion& prompt, const LabeledDataset& d, ChatBackend& classifier,
                           const ClassifierConfig& cfg, const ModelRoute& route,
                           const ClassificationObserver& observer = {});

struct EngineDeps {
    ChatBackend& classifier;
    ClassifierConfig classifier_config;
    Agent& agent;
    ReviewGate& review;
    ModelRoute route;
    Codebook codebook = default_codebook();
    RunSink* sink = nullptr;
    Clock clock = system_clock();
    ClassificationObserver observer;
    int max_reproposals = 2;
    std::size_t excerpt_chars = kDefaultExcerptChars;
};

/// Runs the loop from `p0`, or continues a persisted partial run when
/// `resume` carries earlier iterations. Each iteration reaches the sink
/// before the next starts. Transport failures end the run with
/// stop_reason = error instead of throwing.
RunRecord run_refinement(const LabeledDataset& d, const PromptVersion& p0, const StopPolicy& policy, EngineDeps& deps,
                         std::string run_id = {}, std::optional<RunRecord> resume = std::nullopt);

/// PromptVersion v0 built from the codebook.
PromptVersion baseline_prompt(const Codebook& cb, const std::string& created_at);

}  // namespace labelrefine
