#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "labelrefine/metrics.hpp"

namespace labelrefine {

struct LabeledDataset;

struct DisagreementGroup {
    std::string predicted;  // category code or UNPARSED
    std::string gold;
    int count = 0;
    std::vector<std::string> session_ids;
    /// Preceding tutor message and last student message, truncated.
    std::vector<std::string> excerpts;

    bool operator==(const DisagreementGroup&) const = default;
};

struct DisagreementReport {
    std::map<Dimension, std::vector<DisagreementGroup>> groups;
    std::map<Dimension, double> kappas;
    Dimension lowest_kappa_dimension = Dimension::intent;

    int disagreement_count(Dimension d) const;
    int total() const;
    bool operator==(const DisagreementReport&) const = default;
};

inline constexpr std::size_t kDefaultExcerptChars = 280;

/// Excerpt of a session: "Tutor: ...\nStudent: ..." cut to `budget` bytes on
/// a UTF-8 boundary.
std::string session_excerpt(const Session& s, std::size_t budget = kDefaultExcerptChars);

/// Groups disagreements by (predicted, gold) per dimension, largest first.
/// The lowest-kappa dimension breaks ties in intent < topic < followup order.
/// Throws InvalidArgument when there are no disagreements.
DisagreementReport build_disagreement_report(const EvalResult& e, const LabeledDataset& d,
                                             std::size_t excerpt_chars = kDefaultExcerptChars);

}  // namespace labelrefine
