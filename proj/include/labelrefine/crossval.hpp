#pragma once

// Stratified k-fold cross-validation of the refinement loop.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelrefine/dataset.hpp"
#include "labelrefine/engine.hpp"

namespace labelrefine {

struct FoldResult {
    int fold = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::optional<int> best_version;
    double train_kappa = 0.0;  // overall kappa of the best version on the train split
    std::optional<EvalResult> test;
    std::optional<EvalResult> baseline_test;
    std::optional<StopReason> stop_reason;
    int iterations = 0;
    std::string error;

    bool ok() const { return error.empty() && test.has_value(); }
};

struct CvResult {
    int k = 0;
    std::uint64_t seed = 0;
    FoldAssignment folds;
    std::vector<FoldResult> fold_results;
    /// Aggregates over successful folds only.
    int effective_n = 0;
    double mean_test_kappa = 0.0;
    double sd_test_kappa = 0.0;
    std::map<Dimension, double> mean_test_per_dimension;
    std::optional<double> validation_kappa;
    std::optional<double> overfit_gap;

    std::vector<double> test_kappas() const;
};

/// validation_kappa - mean(test_kappas). InvalidArgument on an empty list.
double overfitting_gap(double validation_kappa, std::span<const double> test_kappas);

struct BaselineImprovement {
    std::vector<double> per_fold;  // test(best) - test(v0), successful folds in order
    double mean = 0.0;
};

/// InvalidArgument when a successful fold lacks its baseline evaluation.
BaselineImprovement improvement_from_baseline(const CvResult& cv);

struct CvHooks {
    /// Runs the refinement loop on the fold's training split.
    std::function<RunRecord(int fold, const LabeledDataset& train)> refine;
    /// Evaluates one prompt on the fold's held-out split.
    std::function<EvalResult(int fold, const PromptVersion& prompt, const LabeledDataset& test)> evaluate;
};

struct CvOptions {
    int k = 4;
    std::uint64_t seed = 1;
    std::vector<StratumKey> strata{StratumKey::intent};
    bool parallel = false;
    std::optional<double> validation_kappa;
};

/// Requires |d| >= 2k. A fold whose refinement or evaluation throws
/// TransportError (or whose run ends with stop_reason error) is recorded
/// with its error and left out of the aggregates.
CvResult run_cv(const LabeledDataset& d, const CvOptions& opts, const CvHooks& hooks);

/// Recomputes the aggregate fields from fold_results.
void aggregate(CvResult& cv);

/// Fold columns then mean +/- SD, values at two decimals.
std::string render_cv_table(const CvResult& cv, const std::string& label = "test kappa");

nlohmann::json cv_to_json(const CvResult& cv);
CvResult cv_from_json(const nlohmann::json& j);

}  // namespace labelrefine
