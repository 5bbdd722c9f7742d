#pragma once

// Text and JSON reports for refinement runs and cross-validation.

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "labelrefine/crossval.hpp"
#include "labelrefine/dataset.hpp"
#include "labelrefine/engine.hpp"

namespace labelrefine {

struct HumanBaseline {
    std::string rater_a;
    std::string rater_b;
    std::int64_t n = 0;  // sessions labeled by both raters
    /// Dimensions whose kappa is undefined (both raters constant) are absent.
    std::map<Dimension, double> per_dimension_kappa;
    std::optional<double> overall_kappa;
};

/// Agreement between the first two raters (lexicographic ids) on the
/// sessions both labeled. nullopt when fewer than two raters exist.
std::optional<HumanBaseline> human_baseline(const LabeledDataset& d);

struct Report {
    std::string text;
    nlohmann::json data;
};

struct ReportOptions {
    double regression_threshold = 0.05;
};

/// Works on partial runs too. `dataset` enables the human-baseline row.
Report render_report(const RunRecord& run, const LabeledDataset* dataset = nullptr, const ReportOptions& opts = {});
Report render_cv_report(const CvResult& cv, const LabeledDataset* dataset = nullptr);

}  // namespace labelrefine
