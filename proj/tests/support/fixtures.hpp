#pragma once

// Shared test fixtures and the independent kappa oracle.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "labelrefine/dataset.hpp"
#include "labelrefine/engine.hpp"
#include "labelrefine/mock.hpp"
#include "labelrefine/review.hpp"
#include "labelrefine/synthetic.hpp"

namespace fixtures {

using namespace labelrefine;

/// Kappa straight from label pairs: observed agreement over items, expected
/// agreement from the two marginal frequency tables. Shares no code with the
/// library.
inline double kappa_oracle(const std::vector<std::pair<int, int>>& pairs) {
    const double n = static_cast<double>(pairs.size());
    std::map<int, double> ca, cb;
    double agree = 0;
    for (const auto& [a, b] : pairs) {
        if (a == b) agree += 1;
        ca[a] += 1;
        cb[b] += 1;
    }
    double pe = 0;
    for (const auto& [c, x] : ca)
        if (auto it = cb.find(c); it != cb.end()) pe += (x / n) * (it->second / n);
    const double po = agree / n;
    return (po - pe) / (1 - pe);
}

/// Label pairs (row category, column category) spelled out from a matrix.
inline std::vector<std::pair<int, int>> pairs_from_matrix(const std::vector<std::vector<int>>& m) {
    std::vector<std::pair<int, int>> out;
    for (std::size_t r = 0; r < m.size(); ++r)
        for (std::size_t c = 0; c < m[r].size(); ++c)
            for (int i = 0; i < m[r][c]; ++i) out.emplace_back(static_cast<int>(r), static_cast<int>(c));
    return out;
}

// Two-rater matrices (rows rater_a, columns rater_b) over 80 sessions, found
// by search so their kappas land near 0.78, 0.73 and 0.70.
inline const std::vector<std::vector<int>> kIntentMatrix{{32, 1, 0}, {0, 29, 0}, {8, 2, 8}};
inline const std::vector<std::vector<int>> kTopicMatrix{{32, 11}, {0, 37}};
inline const std::vector<std::vector<int>> kFollowupMatrix{{38, 0, 2}, {3, 23, 1}, {7, 1, 5}};

/// Dataset whose two raters disagree exactly as the three matrices say.
/// Gold follows rater_b.
inline LabeledDataset human_baseline_fixture() {
    const auto ip = pairs_from_matrix(kIntentMatrix);
    const auto tp = pairs_from_matrix(kTopicMatrix);
    const auto fp = pairs_from_matrix(kFollowupMatrix);
    LabeledDataset d;
    for (std::size_t i = 0; i < ip.size(); ++i) {
        Session s;
        s.id = "h" + std::to_string(100 + i);
        s.exchanges.push_back({Role::student, "question " + std::to_string(i), 0});
        d.sessions.push_back(s);
        d.raters["rater_a"][s.id] = label_from_indices(ip[i].first, tp[i].first, fp[i].first);
        d.raters["rater_b"][s.id] = label_from_indices(ip[i].second, tp[i].second, fp[i].second);
        d.gold[s.id] = d.raters["rater_b"][s.id];
    }
    return d;
}

/// Iterations for v7..v10 with the per-dimension values of the published
/// progression table; v10 carries the follow-up drop.
inline RunRecord progression_fixture() {
    const std::array<double, 4> overall{0.93, 0.92, 0.93, 0.91};
    const std::array<double, 4> intent{0.84, 0.81, 0.84, 0.81};
    const std::array<double, 4> topic{0.85, 0.80, 0.84, 0.85};
    const std::array<double, 4> followup{0.83, 0.83, 0.83, 0.75};
    RunRecord run;
    run.run_id = "progression";
    for (int i = 0; i < 4; ++i) {
        PromptVersion v;
        v.version = 7 + i;
        if (i > 0) v.parent = 6 + i;
        v.body = "prompt v" + std::to_string(7 + i);
        v.created_at = format_utc(1767225600 + i);
        run.versions.push_back(v);
        IterationRecord r;
        r.iteration = i;
        r.prompt_version = 7 + i;
        r.eval.prompt_version = 7 + i;
        r.eval.overall_kappa = overall[static_cast<std::size_t>(i)];
        r.eval.per_dimension_kappa = {{Dimension::intent, intent[static_cast<std::size_t>(i)]},
                                      {Dimension::topic, topic[static_cast<std::size_t>(i)]},
                                      {Dimension::followup, followup[static_cast<std::size_t>(i)]}};
        r.eval.parsed = r.eval.total = 80;
        r.eval.parse_rate = 1.0;
        if (i < 3) r.applied_version = 8 + i;
        r.started_at = format_utc(1767225700 + 2 * i);
        r.finished_at = format_utc(1767225701 + 2 * i);
        r.cumulative_cost = 0.1 * (i + 1);
        run.iterations.push_back(r);
    }
    run.stop_reason = StopReason::plateau;
    run.best_version = 7;
    return run;
}

/// Mock backends plus engine wiring for offline loop tests.
struct MockRig {
    MockClassifierBackend classifier;
    ScriptedAgent agent;
    AutoReview auto_review;
    PriceTable prices{{"mock-classifier", {2.0, 8.0}}, {"mock-agent", {3.0, 15.0}}};

    explicit MockRig(MockClassifierOptions opts = {}) : classifier(std::move(opts)) {}

    EngineDeps deps(ReviewGate* review = nullptr) {
        ClassifierConfig cfg;
        cfg.model = "mock-classifier";
        cfg.parallelism = 4;
        EngineDeps d{classifier, cfg, agent, review ? *review : auto_review,
                     ModelRoute{"mock-classifier", "mock-agent", prices},
                     default_codebook(), nullptr, logical_clock(), {}};
        return d;
    }
};

inline LabeledDataset synthetic80(std::uint64_t seed = 1, int raters = 2) {
    SyntheticProfile p;
    p.raters = raters;
    return generate_synthetic(seed, 80, p);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("labelrefine-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixtures
