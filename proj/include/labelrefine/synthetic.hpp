#pragma once

// Synthetic tutoring sessions for offline runs. Student messages carry
// lexical markers tied to their gold labels; the mock classifier reads the
// same marker catalog back.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labelrefine/dataset.hpp"

namespace labelrefine {

struct MarkerClass {
    std::string name;
    Dimension dimension;
    int gold_category;        // index into categories(dimension)
    int confusable_category;  // what an unaided classifier says when wrong
    double base_accuracy;
    std::string rule_token;  // empty: no prompt rule addresses this class
    std::vector<std::string> phrases;
};

/// Fixed catalog, ordered so that classes with rules are matched first.
std::span<const MarkerClass> marker_catalog();

struct SyntheticProfile {
    std::array<double, 3> intent{0.50, 0.40, 0.10};
    std::array<double, 2> topic{0.45, 0.55};
    std::array<double, 3> followup{0.55, 0.30, 0.15};
    std::array<double, 3> length{0.35, 0.40, 0.25};  // short, medium, long
    std::array<double, 5> topic_area{0.25, 0.30, 0.20, 0.15, 0.10};
    /// Probability that a session of a category uses that category's hard phrasing.
    double hard_share = 0.5;
    /// Number of simulated raters; each disagrees with gold per dimension with rater_noise.
    int raters = 0;
    double rater_noise = 0.1;

    /// Throws InvalidArgument unless each distribution sums to 1 within 1e-9.
    void validate() const;
};

/// Deterministic given (seed, n, profile). Per-dimension label counts follow
/// largest-remainder apportionment of n, so marginals sit within one item of
/// expectation.
LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n, const SyntheticProfile& profile = {});

}  // namespace labelrefine
