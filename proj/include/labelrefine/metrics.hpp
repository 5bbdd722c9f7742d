#pragma once

// Reliability statistics: confusion matrices, Cohen's kappa, macro F1,
// Landis-Koch bands and mean/SD aggregation.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelrefine/model.hpp"

namespace labelrefine {

/// Prediction-side category for sessions whose classifier output did not parse.
inline constexpr std::string_view kUnparsed = "UNPARSED";

/// Rows are rater A (prediction), columns rater B (gold). When an UNPARSED
/// category is present it is always the last one and its column is empty.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    ConfusionMatrix(std::vector<std::string> categories, std::vector<std::int64_t> counts);

    std::size_t size() const { return categories_.size(); }
    const std::vector<std::string>& categories() const { return categories_; }
    std::int64_t at(std::size_t row, std::size_t col) const { return counts_[row * size() + col]; }
    std::int64_t& at(std::size_t row, std::size_t col) { return counts_[row * size() + col]; }
    std::int64_t n() const;
    std::int64_t row_total(std::size_t row) const;
    std::int64_t col_total(std::size_t col) const;
    std::int64_t diagonal() const;
    std::size_t index_of(std::string_view category) const;

    ConfusionMatrix transposed() const;
    /// Reorders rows and columns together; order[i] is the old index placed at i.
    ConfusionMatrix permuted(std::span<const std::size_t> order) const;
    ConfusionMatrix scaled(std::int64_t factor) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::vector<std::string> categories_;
    std::vector<std::int64_t> counts_;
};

/// Builds the matrix over `categories` plus a trailing UNPARSED row category.
/// Gold entries must be regular categories; predictions may be UNPARSED.
ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> gold,
                                 std::span<const std::string_view> categories);

/// Index form: pred index -1 marks UNPARSED.
ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> gold,
                                 std::span<const std::string> categories);

/// kappa = (p_o - p_e) / (1 - p_e). Throws UndefinedKappa when p_e = 1.
double cohen_kappa(const ConfusionMatrix& m);

/// Unweighted mean of per-category F1 over regular categories that occur in
/// gold or prediction. UNPARSED never contributes a term of its own.
double macro_f1(const ConfusionMatrix& m);

ConfusionMatrix dimension_matrix(Dimension d, const PredictionMap& preds, const GoldLabels& gold);

/// Joint matrix over the 18 (intent, topic, followup) triples plus UNPARSED.
ConfusionMatrix joint_matrix(const PredictionMap& preds, const GoldLabels& gold);

std::map<Dimension, double> per_dimension_kappa(const PredictionMap& preds, const GoldLabels& gold);
double overall_kappa(const PredictionMap& preds, const GoldLabels& gold);

/// Code for the joint category of a triple, e.g. "AS/P/E".
std::string joint_code(const LabelSet& l);

enum class Band { poor, slight, fair, moderate, substantial, almost_perfect };
std::string_view to_string(Band b);
Band landis_koch_band(double kappa);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); needs at least two values.
MeanSd mean_sd(std::span<const double> values);

/// Half-away-from-zero rounding with a small nudge so decimal ties such as
/// 0.755 round as written.
double round_to(double value, int decimals = 2);
std::string format_fixed(double value, int decimals = 2);

struct Disagreement {
    std::string session_id;
    Dimension dimension = Dimension::intent;
    std::string predicted;  // category code or UNPARSED
    std::string gold;

    bool operator==(const Disagreement&) const = default;
};

struct EvalResult {
    int prompt_version = 0;
    std::map<Dimension, double> per_dimension_kappa;
    double overall_kappa = 0.0;
    std::map<Dimension, double> per_dimension_f1;
    double overall_f1 = 0.0;
    double parse_rate = 0.0;
    std::int64_t parsed = 0;
    std::int64_t total = 0;
    std::vector<Disagreement> disagreements;
    /// Raw output of every prediction that failed to parse, kept for audit.
    std::vector<Prediction> unparsed;
    TokenUsage usage;
    double cost = 0.0;

    bool operator==(const EvalResult&) const = default;
};

/// Scores predictions against gold; cost and usage are left for the caller.
EvalResult score_predictions(int prompt_version, const PredictionMap& preds, const GoldLabels& gold);

}  // namespace labelrefine
