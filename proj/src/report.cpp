#include "labelrefine/report.hpp"

#include <cstdio>
#include <iomanip>
#include <sstream>

#include "labelrefine/serialization.hpp"

namespace labelrefine {

namespace {

std::string cell(double v) { return format_fixed(v); }

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::string money(double usd) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "$%.4f", usd);
    return buf;
}

json banded(const std::map<Dimension, double>& kappas) {
    json j = json::object();
    for (const auto& [d, k] : kappas) j[std::string(to_string(d))] = to_string(landis_koch_band(k));
    return j;
}

}  // namespace

std::optional<HumanBaseline> human_baseline(const LabeledDataset& d) {
    if (d.raters.size() < 2) return std::nullopt;
    auto it = d.raters.begin();
    const auto& [name_a, labels_a] = *it++;
    const auto& [name_b, labels_b] = *it;
    HumanBaseline hb;
    hb.rater_a = name_a;
    hb.rater_b = name_b;
    PredictionMap preds;
    GoldLabels other;
    for (const auto& [id, l] : labels_a) {
        auto jt = labels_b.find(id);
        if (jt == labels_b.end()) continue;
        preds.emplace(id, l);
        other.emplace(id, jt->second);
    }
    hb.n = static_cast<std::int64_t>(other.size());
    if (hb.n == 0) return std::nullopt;
    for (Dimension dim : kDimensions) {
        try {
            hb.per_dimension_kappa[dim] = cohen_kappa(dimension_matrix(dim, preds, other));
        } catch (const UndefinedKappa&) {
        }
    }
    try {
        hb.overall_kappa = cohen_kappa(joint_matrix(preds, other));
    } catch (const UndefinedKappa&) {
    }
    return hb;
}

Report render_report(const RunRecord& run, const LabeledDataset* dataset, const ReportOptions& opts) {
    Report r;
    std::ostringstream out;
    json data;
    data["run_id"] = run.run_id;
    data["stop_reason"] = run.stop_reason ? json(to_string(*run.stop_reason)) : json(nullptr);
    data["status"] = run.stop_reason ? (*run.stop_reason == StopReason::error ? "error" : "completed") : "running";
    if (!run.error.empty()) data["error"] = run.error;

    out << "Run " << run.run_id << "  status: " << data["status"].get<std::string>();
    if (run.stop_reason) out << " (" << to_string(*run.stop_reason) << ")";
    out << "\n";
    if (!run.error.empty()) out << "error: " << run.error << "\n";
    out << "\n";

    std::optional<int> best;
    if (!run.iterations.empty()) best = run.best_version ? *run.best_version : select_best(run);

    out << "Iter | Version | Intent | Topic | Follow-up | Overall | F1   | Parse | Cost      | Decision\n"
        << "---- | ------- | ------ | ----- | --------- | ------- | ---- | ----- | --------- | --------\n";
    json rows = json::array();
    for (const IterationRecord& it : run.iterations) {
        const auto& k = it.eval.per_dimension_kappa;
        std::string version = "v" + std::to_string(it.prompt_version);
        if (best && *best == it.prompt_version && !it.eval_reused) version += "*";
        std::string decision = it.decision ? std::string(to_string(*it.decision)) : "-";
        if (it.applied_version) decision += " -> v" + std::to_string(*it.applied_version);
        if (it.stop_reason) decision += " [stop: " + std::string(to_string(*it.stop_reason)) + "]";
        if (it.eval_reused) decision += " (reused eval)";
        out << pad(std::to_string(it.iteration), 4) << " | " << pad(version, 7) << " | "
            << pad(cell(k.at(Dimension::intent)), 6) << " | " << pad(cell(k.at(Dimension::topic)), 5) << " | "
            << pad(cell(k.at(Dimension::followup)), 9) << " | " << pad(cell(it.eval.overall_kappa), 7) << " | "
            << pad(cell(it.eval.overall_f1), 4) << " | " << pad(cell(it.eval.parse_rate), 5) << " | "
            << pad(money(it.cumulative_cost), 9) << " | " << decision << "\n";
        rows.push_back(json{{"iteration", it.iteration},
                            {"version", it.prompt_version},
                            {"per_dimension_kappa", dimension_map_to_json(k)},
                            {"overall_kappa", it.eval.overall_kappa},
                            {"per_dimension_f1", dimension_map_to_json(it.eval.per_dimension_f1)},
                            {"overall_f1", it.eval.overall_f1},
                            {"parse_rate", it.eval.parse_rate},
                            {"eval_cost", it.eval_reused ? 0.0 : it.eval.cost},
                            {"cumulative_cost", it.cumulative_cost},
                            {"eval_reused", it.eval_reused},
                            {"decision", it.decision ? json(to_string(*it.decision)) : json(nullptr)},
                            {"applied_version", it.applied_version ? json(*it.applied_version) : json(nullptr)}});
    }
    data["iterations"] = rows;
    out << "\n";

    if (best) {
        const IterationRecord* b = nullptr;
        for (const IterationRecord& it : run.iterations)
            if (it.prompt_version == *best && !it.eval_reused) {
                b = &it;
                break;
            }
        const Band band = landis_koch_band(b->eval.overall_kappa);
        out << "Best version: v" << *best << "  overall kappa " << cell(b->eval.overall_kappa) << " ("
            << to_string(band) << "), F1 " << cell(b->eval.overall_f1) << "\n";
        data["best"] = json{{"version", *best},
                            {"overall_kappa", b->eval.overall_kappa},
                            {"band", to_string(band)},
                            {"per_dimension_kappa", dimension_map_to_json(b->eval.per_dimension_kappa)},
                            {"per_dimension_band", banded(b->eval.per_dimension_kappa)},
                            {"overall_f1", b->eval.overall_f1}};
    } else {
        out << "Best version: none (no evaluations yet)\n";
        data["best"] = nullptr;
    }

    const double total_cost = run.iterations.empty() ? 0.0 : run.iterations.back().cumulative_cost;
    data["total_cost"] = total_cost;
    data["classifier_usage"] = run.classifier_usage();
    data["agent_usage"] = run.agent_usage();
    out << "Total cost: " << money(total_cost) << " (classifier " << run.classifier_usage().input_tokens << " in / "
        << run.classifier_usage().output_tokens << " out tokens; agent " << run.agent_usage().input_tokens << " in / "
        << run.agent_usage().output_tokens << " out)\n";

    data["human_baseline"] = nullptr;
    if (dataset) {
        if (auto hb = human_baseline(*dataset)) {
            out << "Human baseline (" << hb->rater_a << " vs " << hb->rater_b << ", n=" << hb->n << "):";
            for (Dimension d : kDimensions) {
                out << "  " << to_string(d) << " ";
                auto it = hb->per_dimension_kappa.find(d);
                if (it == hb->per_dimension_kappa.end()) out << "undefined";
                else out << cell(it->second) << " (" << to_string(landis_koch_band(it->second)) << ")";
            }
            if (hb->overall_kappa)
                out << "  overall " << cell(*hb->overall_kappa) << " ("
                    << to_string(landis_koch_band(*hb->overall_kappa)) << ")";
            out << "\n";
            data["human_baseline"] = json{{"rater_a", hb->rater_a},
                                          {"rater_b", hb->rater_b},
                                          {"n", hb->n},
                                          {"per_dimension_kappa", dimension_map_to_json(hb->per_dimension_kappa)},
                                          {"per_dimension_band", banded(hb->per_dimension_kappa)},
                                          {"overall_kappa", hb->overall_kappa ? json(*hb->overall_kappa) : json(nullptr)},
                                          {"overall_band", hb->overall_kappa
                                                               ? json(to_string(landis_koch_band(*hb->overall_kappa)))
                                                               : json(nullptr)}};
        }
    }

    const auto history = run.version_history();
    const auto events = history.size() >= 2 ? detect_regressions(history, opts.regression_threshold)
                                            : std::vector<RegressionEvent>{};
    data["regression_threshold"] = opts.regression_threshold;
    data["regressions"] = events;
    out << "Regressions (drop > " << cell(opts.regression_threshold) << "):";
    if (events.empty()) out << " none\n";
    else out << "\n";
    for (const RegressionEvent& e : events)
        out << "  " << e.metric << " v" << e.from_version << " -> v" << e.to_version << ": " << cell(e.from_value)
            << " -> " << cell(e.to_value) << " (delta " << cell(e.delta) << ")\n";

    r.text = out.str();
    r.data = std::move(data);
    return r;
}

Report render_cv_report(const CvResult& cv, const LabeledDataset* dataset) {
    Report r;
    std::ostringstream out;
    out << cv.k << "-fold cross-validation (seed " << cv.seed << ", " << cv.effective_n << " of " << cv.k
        << " folds succeeded)\n\n";
    out << render_cv_table(cv);
    out << "\nFold | Train | Test | Best | Train kappa | Test kappa | Baseline | Iterations | Stop\n"
        << "---- | ----- | ---- | ---- | ----------- | ---------- | -------- | ---------- | ----\n";
    for (const FoldResult& f : cv.fold_results) {
        out << pad(std::to_string(f.fold), 4) << " | " << pad(std::to_string(f.train_ids.size()), 5) << " | "
            << pad(std::to_string(f.test_ids.size()), 4) << " | ";
        if (f.ok()) {
            out << pad("v" + std::to_string(*f.best_version), 4) << " | " << pad(cell(f.train_kappa), 11) << " | "
                << pad(cell(f.test->overall_kappa), 10) << " | "
                << pad(f.baseline_test ? cell(f.baseline_test->overall_kappa) : "-", 8) << " | "
                << pad(std::to_string(f.iterations), 10) << " | "
                << (f.stop_reason ? std::string(to_string(*f.stop_reason)) : "-") << "\n";
        } else {
            out << "failed: " << f.error << "\n";
        }
    }
    json data = cv_to_json(cv);
    data["human_baseline"] = nullptr;
    if (dataset) {
        if (auto hb = human_baseline(*dataset)) {
            out << "\nHuman baseline (" << hb->rater_a << " vs " << hb->rater_b << "): overall "
                << (hb->overall_kappa ? cell(*hb->overall_kappa) : "undefined") << "\n";
            data["human_baseline"] = json{{"rater_a", hb->rater_a},
                                          {"rater_b", hb->rater_b},
                                          {"n", hb->n},
                                          {"per_dimension_kappa", dimension_map_to_json(hb->per_dimension_kappa)},
                                          {"overall_kappa", hb->overall_kappa ? json(*hb->overall_kappa) : json(nullptr)}};
        }
    }
    r.text = out.str();
    r.data = std::move(data);
    return r;
}

}  // namespace labelrefine
