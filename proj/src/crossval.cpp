#include "labelrefine/crossval.hpp"

#include <cstdio>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "labelrefine/serialization.hpp"

namespace labelrefine {

std::vector<double> CvResult::test_kappas() const {
    std::vector<double> out;
    for (const FoldResult& f : fold_results)
        if (f.ok()) out.push_back(f.test->overall_kappa);
    return out;
}

double overfitting_gap(double validation_kappa, std::span<const double> test_kappas) {
    if (test_kappas.empty()) throw InvalidArgument("overfitting_gap needs at least one test kappa");
    return validation_kappa - mean(test_kappas);
}

BaselineImprovement improvement_from_baseline(const CvResult& cv) {
    BaselineImprovement out;
    for (const FoldResult& f : cv.fold_results) {
        if (!f.ok()) continue;
        if (!f.baseline_test) throw InvalidArgument("fold " + std::to_string(f.fold) + " has no baseline evaluation");
        out.per_fold.push_back(f.test->overall_kappa - f.baseline_test->overall_kappa);
    }
    if (out.per_fold.empty()) throw InvalidArgument("no successful folds");
    out.mean = mean(out.per_fold);
    return out;
}

void aggregate(CvResult& cv) {
    const std::vector<double> kappas = cv.test_kappas();
    cv.effective_n = static_cast<int>(kappas.size());
    cv.mean_test_kappa = 0.0;
    cv.sd_test_kappa = 0.0;
    cv.mean_test_per_dimension.clear();
    cv.overfit_gap.reset();
    if (kappas.empty()) return;
    if (kappas.size() == 1) {
        cv.mean_test_kappa = kappas.front();
    } else {
        const MeanSd ms = mean_sd(kappas);
        cv.mean_test_kappa = ms.mean;
        cv.sd_test_kappa = ms.sd;
    }
    for (Dimension d : kDimensions) {
        std::vector<double> vals;
        for (const FoldResult& f : cv.fold_results)
            if (f.ok()) vals.push_back(f.test->per_dimension_kappa.at(d));
        cv.mean_test_per_dimension[d] = mean(vals);
    }
    if (cv.validation_kappa) cv.overfit_gap = overfitting_gap(*cv.validation_kappa, kappas);
}

CvResult run_cv(const LabeledDataset& d, const CvOptions& opts, const CvHooks& hooks) {
    if (opts.k < 2) throw InvalidArgument("k must be at least 2");
    if (d.size() < static_cast<std::size_t>(2 * opts.k))
        throw InvalidArgument("cross-validation with k=" + std::to_string(opts.k) + " needs at least " +
                              std::to_string(2 * opts.k) + " sessions, dataset has " + std::to_string(d.size()));
    if (!hooks.refine || !hooks.evaluate) throw InvalidArgument("cross-validation hooks are not set");

    CvResult cv;
    cv.k = opts.k;
    cv.seed = opts.seed;
    cv.validation_kappa = opts.validation_kappa;
    cv.folds = stratified_kfold(d, opts.k, opts.seed, opts.strata);
    cv.fold_results.resize(static_cast<std::size_t>(opts.k));

    auto run_fold = [&](int f) {
        FoldResult& out = cv.fold_results[static_cast<std::size_t>(f)];
        out.fold = f;
        const Split split = train_test_split(d, cv.folds, f);
        out.train_ids = split.train.ids();
        out.test_ids = split.test.ids();
        try {
            const RunRecord run = hooks.refine(f, split.train);
            out.iterations = static_cast<int>(run.iterations.size());
            out.stop_reason = run.stop_reason;
            if (run.stop_reason == StopReason::error || run.iterations.empty()) {
                out.error = run.error.empty() ? "refinement produced no evaluations" : run.error;
                return;
            }
            const int best = run.best_version ? *run.best_version : select_best(run);
            out.best_version = best;
            for (const IterationRecord& r : run.iterations)
                if (r.prompt_version == best && !r.eval_reused) {
                    out.train_kappa = r.eval.overall_kappa;
                    break;
                }
            out.test = hooks.evaluate(f, run.version(best), split.test);
            out.baseline_test = hooks.evaluate(f, run.version(0), split.test);
        } catch (const TransportError& e) {
            out.error = e.what();
            out.test.reset();
        }
    };

    if (opts.parallel) {
        std::vector<std::jthread> workers;
        for (int f = 0; f < opts.k; ++f) workers.emplace_back(run_fold, f);
    } else {
        for (int f = 0; f < opts.k; ++f) run_fold(f);
    }
    for (const FoldResult& f : cv.fold_results)
        if (!f.ok()) spdlog::warn("fold {} failed and is excluded from aggregates: {}", f.fold, f.error);
    aggregate(cv);
    return cv;
}

std::string render_cv_table(const CvResult& cv, const std::string& label) {
    std::ostringstream out;
    out << label;
    for (const FoldResult& f : cv.fold_results) out << " | Fold " << f.fold;
    out << " | Mean +/- SD\n";
    out << std::string(label.size(), '-');
    for (std::size_t i = 0; i < cv.fold_results.size(); ++i) out << " | ------";
    out << " | -----------\n";
    auto row = [&](const std::string& name, auto value_of) {
        out << name << std::string(label.size() > name.size() ? label.size() - name.size() : 0, ' ');
        for (const FoldResult& f : cv.fold_results) out << " | " << (f.ok() ? value_of(f) : std::string("failed"));
    };
    row("test", [](const FoldResult& f) { return format_fixed(f.test->overall_kappa); });
    out << " | " << format_fixed(cv.mean_test_kappa) << " +/- " << format_fixed(cv.sd_test_kappa);
    if (cv.effective_n != cv.k) out << " (n=" << cv.effective_n << ")";
    out << "\n";
    bool have_baseline = cv.effective_n > 0;
    for (const FoldResult& f : cv.fold_results)
        if (f.ok() && !f.baseline_test) have_baseline = false;
    if (have_baseline) {
        row("baseline", [](const FoldResult& f) { return format_fixed(f.baseline_test->overall_kappa); });
        const BaselineImprovement imp = improvement_from_baseline(cv);
        out << " | delta " << (imp.mean >= 0 ? "+" : "") << format_fixed(imp.mean) << "\n";
    }
    row("best", [](const FoldResult& f) { return "v" + std::to_string(*f.best_version); });
    out << "\n";
    if (cv.overfit_gap)
        out << "validation kappa " << format_fixed(*cv.validation_kappa) << ", overfitting gap "
            << format_fixed(*cv.overfit_gap) << "\n";
    return out.str();
}

nlohmann::json cv_to_json(const CvResult& cv) {
    json folds = json::array();
    for (const FoldResult& f : cv.fold_results) {
        folds.push_back(json{{"fold", f.fold},
                             {"train_ids", f.train_ids},
                             {"test_ids", f.test_ids},
                             {"best_version", f.best_version ? json(*f.best_version) : json(nullptr)},
                             {"train_kappa", f.train_kappa},
                             {"test", f.test ? json(*f.test) : json(nullptr)},
                             {"baseline_test", f.baseline_test ? json(*f.baseline_test) : json(nullptr)},
                             {"stop_reason", f.stop_reason ? json(to_string(*f.stop_reason)) : json(nullptr)},
                             {"iterations", f.iterations},
                             {"error", f.error}});
    }
    json j{{"k", cv.k},
           {"seed", cv.seed},
           {"assignment", cv.folds.assignment},
           {"folds", folds},
           {"effective_n", cv.effective_n},
           {"mean_test_kappa", cv.mean_test_kappa},
           {"sd_test_kappa", cv.sd_test_kappa},
           {"mean_test_per_dimension", dimension_map_to_json(cv.mean_test_per_dimension)},
           {"validation_kappa", cv.validation_kappa ? json(*cv.validation_kappa) : json(nullptr)},
           {"overfit_gap", cv.overfit_gap ? json(*cv.overfit_gap) : json(nullptr)}};
    if (cv.effective_n > 0) {
        try {
            const BaselineImprovement imp = improvement_from_baseline(cv);
            j["improvement_from_baseline"] = json{{"per_fold", imp.per_fold}, {"mean", imp.mean}};
        } catch (const InvalidArgument&) {
        }
    }
    return j;
}

CvResult cv_from_json(const nlohmann::json& j) {
    CvResult cv;
    cv.k = j.at("k").get<int>();
    cv.seed = j.at("seed").get<std::uint64_t>();
    cv.folds.k = cv.k;
    cv.folds.assignment = j.at("assignment").get<std::map<std::string, int>>();
    for (const json& f : j.at("folds")) {
        FoldResult r;
        r.fold = f.at("fold").get<int>();
        r.train_ids = f.at("train_ids").get<std::vector<std::string>>();
        r.test_ids = f.at("test_ids").get<std::vector<std::string>>();
        if (!f.at("best_version").is_null()) r.best_version = f.at("best_version").get<int>();
        r.train_kappa = f.at("train_kappa").get<double>();
        if (!f.at("test").is_null()) r.test = f.at("test").get<EvalResult>();
        if (!f.at("baseline_test").is_null()) r.baseline_test = f.at("baseline_test").get<EvalResult>();
        if (!f.at("stop_reason").is_null()) r.stop_reason = parse_stop_reason(f.at("stop_reason").get<std::string>());
        r.iterations = f.at("iterations").get<int>();
        r.error = f.at("error").get<std::string>();
        cv.fold_results.push_back(std::move(r));
    }
    if (!j.at("validation_kappa").is_null()) cv.validation_kappa = j.at("validation_kappa").get<double>();
    aggregate(cv);
    return cv;
}

}  // namespace labelrefine
