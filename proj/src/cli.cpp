#include "labelrefine/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "labelrefine/api.hpp"
#include "labelrefine/config.hpp"
#include "labelrefine/crossval.hpp"
#include "labelrefine/random.hpp"
#include "labelrefine/report.hpp"
#include "labelrefine/serialization.hpp"
#include "labelrefine/store.hpp"
#include "labelrefine/synthetic.hpp"

namespace labelrefine {

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct Flags {
    std::string config;
    std::string output_root;
    std::string dataset;
    std::string review;
    std::string run_id;
    std::string resume;
    std::string validation_run;
    std::string prompt;
    std::string prompt_file;
    std::string out_path;
    std::string host;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters;
    std::optional<int> folds;
    std::optional<int> fold;
    std::optional<int> port;
    std::optional<int> patience;
    std::optional<double> epsilon;
    std::optional<double> validation_kappa;
    std::size_t sessions = 80;
    int raters = 2;
    bool mock = false;
    bool serve = false;
    bool parallel = false;
    bool force = false;
    bool json_out = false;
    bool verbose = false;
};

std::string now_utc() {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
    return format_utc(secs);
}

RunConfig resolve_config(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    apply_env(c, process_env());
    if (f.mock) {
        use_mocks(c);
        c.review = ReviewMode::auto_;
    }
    if (!f.review.empty()) c.review = parse_review_mode(f.review);
    if (!f.output_root.empty()) c.output_root = f.output_root;
    if (!f.dataset.empty()) c.dataset = f.dataset;
    if (f.seed) c.seed = *f.seed;
    if (f.max_iters) c.stop.max_iterations = *f.max_iters;
    if (f.epsilon) c.stop.epsilon = *f.epsilon;
    if (f.patience) c.stop.patience = *f.patience;
    if (f.folds) c.folds = *f.folds;
    if (f.port) c.serve.port = *f.port;
    if (!f.host.empty()) c.serve.host = f.host;
    if (f.parallel) c.cv_parallel = true;
    c.validate();
    return c;
}

struct DatasetSource {
    LabeledDataset data;
    fs::path path;
    std::string sha256;
};

/// Loads the configured dataset, or generates the synthetic one into `dir`.
DatasetSource obtain_dataset(const RunConfig& c, const fs::path& dir) {
    DatasetSource s;
    if (!c.dataset.empty()) {
        s.path = fs::absolute(c.dataset);
        if (!fs::exists(s.path)) throw ConfigError("dataset '" + c.dataset + "' does not exist");
        s.data = load_dataset(s.path);
    } else {
        SyntheticProfile profile;
        profile.raters = c.synthetic_raters;
        s.data = generate_synthetic(c.seed, c.synthetic_sessions, profile);
        s.path = fs::absolute(dir / "dataset.jsonl");
        save_dataset(s.data, s.path);
    }
    s.sha256 = sha256_file(s.path);
    return s;
}

DatasetSource dataset_from_manifest(const json& manifest) {
    DatasetSource s;
    s.path = manifest.at("dataset").at("path").get<std::string>();
    s.sha256 = manifest.at("dataset").at("sha256").get<std::string>();
    if (!fs::exists(s.path)) throw IoError("dataset '" + s.path.string() + "' no longer exists");
    if (sha256_file(s.path) != s.sha256)
        throw ConfigError("dataset '" + s.path.string() + "' changed since the run started");
    s.data = load_dataset(s.path);
    return s;
}

json make_manifest(const std::string& run_id, const std::string& kind, const RunConfig& c, const DatasetSource& ds) {
    json cfg = config_to_json(c);
    return json{{"run_id", run_id},
                {"kind", kind},
                {"created_at", now_utc()},
                {"tool_version", kToolVersion},
                {"dataset", {{"path", ds.path.string()}, {"sha256", ds.sha256}, {"sessions", ds.data.size()}}},
                {"classifier", cfg["classifier"]},
                {"agent", cfg["agent"]},
                {"stop", c.stop},
                {"prices", cfg["prices"]},
                {"seed", c.seed},
                {"review", to_string(c.review)},
                {"prng", kPrngIdentity},
                {"config", cfg}};
}

std::string unique_run_id(const RunStore& store, std::string base) {
    if (!store.exists(base)) return base;
    for (int i = 2;; ++i) {
        std::string id = base + "-" + std::to_string(i);
        if (!store.exists(id)) return id;
    }
}

PromptVersion initial_prompt(const RunConfig& c, const std::string& created_at) {
    if (c.baseline_prompt.empty()) return baseline_prompt(default_codebook(), created_at);
    PromptVersion v;
    v.body = read_file(c.baseline_prompt);
    if (v.body.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ConfigError("baseline_prompt '" + c.baseline_prompt + "' is empty");
    v.changelog = "baseline from " + fs::path(c.baseline_prompt).filename().string();
    v.created_at = created_at;
    v.author = Author::human;
    return v;
}

ModelRoute route_for(const RunConfig& c) { return {c.classifier.model, c.agent.model, c.prices}; }

Dimension lowest_dimension(const EvalResult& e) {
    Dimension low = Dimension::intent;
    for (Dimension d : kDimensions)
        if (e.per_dimension_kappa.at(d) < e.per_dimension_kappa.at(low)) low = d;
    return low;
}

std::string money(double usd) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "$%.4f", usd);
    return buf;
}

/// Persists through the run directory and prints one line per iteration.
class ProgressSink : public RunSink {
public:
    ProgressSink(RunDir& dir, std::ostream& out) : dir_(dir), out_(out) {}

    void on_prompt_version(const PromptVersion& v) override { dir_.on_prompt_version(v); }

    void on_iteration(const IterationRecord& r) override {
        dir_.on_iteration(r);
        const Dimension low = lowest_dimension(r.eval);
        out_ << "iter " << r.iteration << ": v" << r.prompt_version << " overall " << format_fixed(r.eval.overall_kappa)
             << " lowest " << to_string(low) << " " << format_fixed(r.eval.per_dimension_kappa.at(low)) << " parse "
             << r.eval.parsed << "/" << r.eval.total << " cost " << money(r.cumulative_cost);
        if (r.eval_reused) out_ << " (reused)";
        if (r.applied_version) out_ << " -> v" << *r.applied_version << " (" << to_string(*r.decision) << ")";
        else if (r.decision) out_ << " " << to_string(*r.decision) << ": " << r.decision_note;
        else if (!r.decision_note.empty()) out_ << " " << r.decision_note;
        if (r.stop_reason) out_ << " [stop: " << to_string(*r.stop_reason) << "]";
        out_ << "\n" << std::flush;
    }

    void on_finish(const RunRecord& run) override { dir_.on_finish(run); }

private:
    RunDir& dir_;
    std::ostream& out_;
};

void write_run_report(RunDir& dir, const RunRecord& run, const LabeledDataset* d, std::ostream& out) {
    const Report rep = render_report(run, d);
    dir.write_text("report.txt", rep.text);
    dir.write_json("report.json", rep.data);
    out << "\n" << rep.text;
}

int cmd_init(const Flags& f, std::ostream& out) {
    const fs::path path = f.out_path.empty() ? fs::path("labelrefine.json") : fs::path(f.out_path);
    if (fs::exists(path) && !f.force) throw ConfigError("'" + path.string() + "' exists (use --force to overwrite)");
    write_file_atomic(path, config_to_json(RunConfig{}).dump(2) + "\n");
    out << "wrote " << path.string() << "\n";
    return kExitOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
    if (f.out_path.empty()) throw ConfigError("--out is required");
    SyntheticProfile profile;
    profile.raters = f.raters;
    const LabeledDataset d = generate_synthetic(f.seed.value_or(1), f.sessions, profile);
    save_dataset(d, f.out_path);
    out << "wrote " << d.size() << " sessions to " << f.out_path << "\n";
    return kExitOk;
}

int cmd_run(const Flags& f, std::ostream& out, std::istream& in) {
    const RunConfig c = resolve_config(f);
    const RunStore store(c.output_root);
    const bool mock = c.mock_classifier();

    std::optional<RunRecord> prior;
    std::string run_id;
    DatasetSource ds;
    Clock clock;
    PromptVersion p0;
    std::optional<RunDir> dir;

    if (!f.resume.empty()) {
        dir.emplace(store.open(f.resume));
        dir->repair_log();
        prior = dir->load_run();
        run_id = prior->run_id;
        if (prior->stop_reason) {
            out << "run " << run_id << " already finished (" << to_string(*prior->stop_reason) << ")\n";
            return kExitOk;
        }
        ds = dataset_from_manifest(dir->manifest());
        if (prior->versions.empty() || prior->versions.front().version != 0)
            throw ValidationError("run " + run_id + " has no stored v0");
        p0 = prior->versions.front();
        const std::string& last = prior->iterations.empty() ? p0.created_at : prior->iterations.back().finished_at;
        clock = mock ? logical_clock(parse_utc(last) + 1) : system_clock();
        out << "resuming " << run_id << " after " << prior->iterations.size() << " logged iterations\n";
    } else {
        run_id = f.run_id.empty() ? unique_run_id(store, make_run_id(now_utc())) : f.run_id;
        dir.emplace(store.run(run_id));
        if (dir->has_manifest()) throw ConfigError("run '" + run_id + "' already exists (use --resume)");
        fs::create_directories(dir->path());
        ds = obtain_dataset(c, dir->path());
        dir->create(make_manifest(run_id, "run", c, ds));
        clock = mock ? logical_clock() : system_clock();
        p0 = initial_prompt(c, clock());
    }

    std::unique_ptr<ChatBackend> classifier = make_classifier_backend(c.classifier, c.seed);
    AgentBundle agent = make_agent(c.agent);
    DecisionBoard board;
    std::unique_ptr<ReviewGate> review;
    switch (c.review) {
        case ReviewMode::auto_: review = std::make_unique<AutoReview>(); break;
        case ReviewMode::cli: review = std::make_unique<CliReview>(in, out); break;
        case ReviewMode::web: review = std::make_unique<WebReview>(board, clock); break;
    }
    std::unique_ptr<ApiServer> server;
    if (f.serve || c.review == ReviewMode::web) {
        server = std::make_unique<ApiServer>(store, board, c.serve);
        server->start();
        out << "serving " << server->url() << "/api/v1/runs/" << run_id << "\n";
        if (c.review == ReviewMode::web)
            out << "waiting for decisions at " << server->url() << "/api/v1/runs/" << run_id << "/pending\n";
    }

    ProgressSink sink(*dir, out);
    EngineDeps deps{*classifier, c.classifier.classifier_config(), *agent.agent, *review, route_for(c), default_codebook(), nullptr, system_clock(), {}};
    deps.sink = &sink;
    deps.clock = clock;
    deps.max_reproposals = c.max_reproposals;
    out << "run " << run_id << " on " << ds.data.size() << " sessions (" << ds.path.string() << ")\n";
    const RunRecord run = run_refinement(ds.data, p0, c.stop, deps, run_id, std::move(prior));
    write_run_report(*dir, run, &ds.data, out);
    if (server) server->stop();
    if (run.best_version) out << "best version: v" << *run.best_version << "\n";
    if (run.stop_reason == StopReason::error) {
        out << "run aborted: " << run.error << " (resume with --resume " << run_id << ")\n";
        return kExitRuntime;
    }
    return kExitOk;
}

struct FoldInstruments {
    std::unique_ptr<ChatBackend> backend;
    std::unique_ptr<RecordingBackend> recorder;
};

int cmd_cv(const Flags& f, std::ostream& out, std::istream& in) {
    const RunConfig c = resolve_config(f);
    if (c.review == ReviewMode::web) throw ConfigError("cross-validation supports auto or cli review only");
    const RunStore store(c.output_root);
    const bool mock = c.mock_classifier();

    std::optional<double> validation = f.validation_kappa;
    if (!f.validation_run.empty()) {
        const RunRecord vr = store.open(f.validation_run).load_run();
        if (vr.iterations.empty()) throw ConfigError("validation run '" + f.validation_run + "' has no evaluations");
        const int best = select_best(vr);
        for (const IterationRecord& r : vr.iterations)
            if (r.prompt_version == best && !r.eval_reused) validation = r.eval.overall_kappa;
    }

    const std::string cv_id = f.run_id.empty() ? unique_run_id(store, make_run_id(now_utc(), "cv")) : f.run_id;
    RunDir cvdir = store.run(cv_id);
    if (cvdir.has_manifest()) throw ConfigError("run '" + cv_id + "' already exists");
    // Checked before anything touches disk.
    if (!c.dataset.empty() && !fs::exists(c.dataset)) throw ConfigError("dataset '" + c.dataset + "' does not exist");
    const std::size_t n = c.dataset.empty() ? c.synthetic_sessions : load_dataset(c.dataset).size();
    if (n < static_cast<std::size_t>(2 * c.folds))
        throw InvalidArgument("--folds " + std::to_string(c.folds) + " needs at least " + std::to_string(2 * c.folds) +
                              " sessions, dataset has " + std::to_string(n));
    fs::create_directories(cvdir.path());
    const DatasetSource ds = obtain_dataset(c, cvdir.path());
    json manifest = make_manifest(cv_id, "cv", c, ds);
    manifest["folds"] = c.folds;
    cvdir.create(manifest);

    std::vector<FoldInstruments> inst(static_cast<std::size_t>(c.folds));
    for (FoldInstruments& fi : inst) {
        fi.backend = make_classifier_backend(c.classifier, c.seed);
        fi.recorder = std::make_unique<RecordingBackend>(*fi.backend);
    }
    const ModelRoute route = route_for(c);
    std::mutex out_mutex;

    CvOptions opts;
    opts.k = c.folds;
    opts.seed = c.seed;
    opts.parallel = c.cv_parallel && c.review == ReviewMode::auto_;
    opts.validation_kappa = validation;

    CvHooks hooks;
    hooks.refine = [&](int fold, const LabeledDataset& train) {
        FoldInstruments& fi = inst[static_cast<std::size_t>(fold)];
        fi.recorder->set_phase("refine");
        RunDir fdir(cvdir.path() / "folds" / ("fold_" + std::to_string(fold)));
        json fm = make_manifest(cv_id + "/fold_" + std::to_string(fold), "fold", c, ds);
        fm["fold"] = fold;
        fm["train_ids"] = train.ids();
        fdir.create(fm);
        AgentBundle agent = make_agent(c.agent);
        AutoReview auto_review;
        CliReview cli_review(in, out);
        ReviewGate& gate = c.review == ReviewMode::cli ? static_cast<ReviewGate&>(cli_review) : auto_review;
        EngineDeps deps{*fi.recorder, c.classifier.classifier_config(), *agent.agent, gate, route, default_codebook(), nullptr, system_clock(), {}};
        deps.sink = &fdir;
        deps.clock = mock ? logical_clock() : system_clock();
        deps.max_reproposals = c.max_reproposals;
        RunRecord run = run_refinement(train, initial_prompt(c, deps.clock()), c.stop, deps, "fold_" + std::to_string(fold));
        std::lock_guard lock(out_mutex);
        out << "fold " << fold << ": " << run.iterations.size() << " iterations, best v"
            << (run.best_version ? std::to_string(*run.best_version) : std::string("?")) << "\n";
        return run;
    };
    hooks.evaluate = [&](int fold, const PromptVersion& prompt, const LabeledDataset& test) {
        FoldInstruments& fi = inst[static_cast<std::size_t>(fold)];
        fi.recorder->set_phase("test");
        return evaluate_prompt(prompt, test, *fi.recorder, c.classifier.classifier_config(), route);
    };

    const CvResult cv = run_cv(ds.data, opts, hooks);

    // Classifier call log, aggregated per (fold, phase, session).
    std::string log;
    bool leaked = false;
    for (int fold = 0; fold < c.folds; ++fold) {
        std::map<std::pair<std::string, std::string>, int> counts;
        for (const RecordingBackend::Entry& e : inst[static_cast<std::size_t>(fold)].recorder->entries()) {
            ++counts[{e.phase, e.session_id}];
            if (e.phase == "refine" && cv.folds.assignment.at(e.session_id) == fold) leaked = true;
        }
        for (const auto& [key, n] : counts)
            log += json{{"fold", fold}, {"phase", key.first}, {"session_id", key.second}, {"calls", n}}.dump() + "\n";
    }
    cvdir.write_text("classifier_calls.jsonl", log);
    cvdir.write_json("cv.json", cv_to_json(cv));
    const Report rep = render_cv_report(cv, &ds.data);
    cvdir.write_text("report.txt", rep.text);
    cvdir.write_json("report.json", rep.data);
    out << "\n" << rep.text;
    out << "cv run: " << cv_id << "\n";
    if (leaked) {
        spdlog::error("test-fold sessions reached the classifier during refinement");
        return kExitRuntime;
    }
    return cv.effective_n == cv.k ? kExitOk : kExitRuntime;
}

int cmd_eval(const Flags& f, std::ostream& out) {
    const RunConfig c = resolve_config(f);
    const RunStore store(c.output_root);

    PromptVersion prompt;
    std::optional<RunDir> dir;
    std::optional<DatasetSource> ds;
    if (!f.prompt_file.empty()) {
        prompt.body = read_file(f.prompt_file);
        prompt.changelog = "prompt file " + f.prompt_file;
    } else {
        if (f.prompt.empty() || f.run_id.empty()) throw ConfigError("eval needs --prompt vN with --run, or --prompt-file");
        std::string v = f.prompt;
        if (!v.empty() && (v[0] == 'v' || v[0] == 'V')) v.erase(0, 1);
        int version = 0;
        try {
            version = std::stoi(v);
        } catch (const std::logic_error&) {
            throw ConfigError("--prompt must look like v3");
        }
        RunDir root = store.open(f.run_id);
        if (f.fold) {
            dir.emplace(root.path() / "folds" / ("fold_" + std::to_string(*f.fold)));
            if (!dir->has_manifest()) throw NotFound("run '" + f.run_id + "' has no fold " + std::to_string(*f.fold));
        } else {
            dir.emplace(root);
        }
        if (!fs::exists(dir->prompt_path(version)))
            throw NotFound("unknown prompt version v" + std::to_string(version) + " in run '" + f.run_id + "'");
        prompt = parse_prompt_file(read_file(dir->prompt_path(version)));
        if (f.dataset.empty()) {
            ds = dataset_from_manifest(root.manifest());
            if (f.fold) {
                // Held-out split of that fold.
                const auto cvj = root.read_json("cv.json");
                if (!cvj) throw NotFound("run '" + f.run_id + "' has no cross-validation results");
                const CvResult cv = cv_from_json(*cvj);
                ds->data = ds->data.subset(cv.fold_results.at(static_cast<std::size_t>(*f.fold)).test_ids);
            }
        }
    }
    if (!ds) {
        if (c.dataset.empty()) {
            if (!c.mock_classifier()) throw ConfigError("dataset is required");
            DatasetSource s;
            SyntheticProfile profile;
            profile.raters = c.synthetic_raters;
            s.data = generate_synthetic(c.seed, c.synthetic_sessions, profile);
            s.path = "synthetic";
            ds = std::move(s);
        } else {
            if (!fs::exists(c.dataset)) throw ConfigError("dataset '" + c.dataset + "' does not exist");
            DatasetSource s;
            s.path = fs::absolute(c.dataset);
            s.data = load_dataset(s.path);
            s.sha256 = sha256_file(s.path);
            ds = std::move(s);
        }
    }

    std::unique_ptr<ChatBackend> classifier = make_classifier_backend(c.classifier, c.seed);
    const EvalResult e = evaluate_prompt(prompt, ds->data, *classifier, c.classifier.classifier_config(), route_for(c));
    out << "v" << prompt.version << " on " << ds->data.size() << " sessions: overall " << format_fixed(e.overall_kappa)
        << " (" << to_string(landis_koch_band(e.overall_kappa)) << ")";
    for (Dimension d : kDimensions) out << "  " << to_string(d) << " " << format_fixed(e.per_dimension_kappa.at(d));
    out << "  F1 " << format_fixed(e.overall_f1) << "  parse " << e.parsed << "/" << e.total << "  cost "
        << money(e.cost) << "\n";

    const std::string prompt_hash = sha256_hex(prompt.body).substr(0, 12);
    const std::string data_hash = sha256_hex(ds->sha256 + ds->path.string()).substr(0, 12);
    const fs::path target = (dir ? dir->path() : fs::path(c.output_root)) / "evals" /
                            ("eval-" + prompt_hash + "-" + data_hash + ".json");
    write_file_atomic(target, json{{"prompt_version", prompt.version},
                                   {"prompt_sha256", sha256_hex(prompt.body)},
                                   {"dataset", {{"path", ds->path.string()}, {"sha256", ds->sha256}}},
                                   {"eval", e}}
                                  .dump(2) +
                                  "\n");
    out << "saved " << target.string() << "\n";
    return kExitOk;
}

int cmd_report(const Flags& f, std::ostream& out) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    apply_env(c, process_env());
    if (!f.output_root.empty()) c.output_root = f.output_root;
    const RunStore store(c.output_root);
    RunDir dir = store.open(f.run_id);
    const json manifest = dir.manifest();
    std::optional<DatasetSource> ds;
    try {
        ds = dataset_from_manifest(manifest);
    } catch (const Error& e) {
        spdlog::warn("human baseline unavailable: {}", e.what());
    }
    Report rep;
    if (manifest.value("kind", "run") == "cv") {
        const auto cvj = dir.read_json("cv.json");
        if (!cvj) throw NotFound("cross-validation run '" + f.run_id + "' has not finished");
        rep = render_cv_report(cv_from_json(*cvj), ds ? &ds->data : nullptr);
    } else {
        const RunRecord run = dir.load_run();
        rep = render_report(run, ds ? &ds->data : nullptr);
    }
    dir.write_text("report.txt", rep.text);
    dir.write_json("report.json", rep.data);
    out << (f.json_out ? rep.data.dump(2) + "\n" : rep.text);
    return kExitOk;
}

int cmd_serve(const Flags& f, std::ostream& out) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    apply_env(c, process_env());
    if (!f.output_root.empty()) c.output_root = f.output_root;
    if (f.port) c.serve.port = *f.port;
    if (!f.host.empty()) c.serve.host = f.host;
    if (!fs::exists(c.output_root)) throw ConfigError("output root '" + c.output_root + "' does not exist");
    DecisionBoard board;
    ApiServer server(RunStore(c.output_root), board, c.serve);
    out << "serving " << c.output_root << " on http://" << c.serve.host << ":" << c.serve.port << "/api/v1/runs\n"
        << std::flush;
    server.run();
    return kExitOk;
}

void setup_logging(bool verbose) {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_logger_mt("labelrefine");
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
    });
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
    Flags f;
    CLI::App app{"Iterative labeling-prompt refinement with an agent in the loop", "labelrefine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    auto common = [&](CLI::App* s) {
        s->add_option("--config", f.config, "JSON run configuration");
        s->add_option("--output-root", f.output_root, "directory holding runs/");
        s->add_flag("-v,--verbose", f.verbose, "debug logging");
    };
    auto run_like = [&](CLI::App* s) {
        common(s);
        s->add_flag("--mock", f.mock, "offline mock classifier, scripted agent, auto review");
        s->add_option("--dataset", f.dataset, "sessions JSONL");
        s->add_option("--seed", f.seed, "seed for mocks, synthetic data and folds");
        s->add_option("--review", f.review, "auto | cli | web")->check(CLI::IsMember({"auto", "cli", "web"}));
        s->add_option("--max-iters", f.max_iters, "iteration budget")->check(CLI::PositiveNumber);
        s->add_option("--epsilon", f.epsilon, "plateau threshold (0 disables)")->check(CLI::NonNegativeNumber);
        s->add_option("--patience", f.patience, "plateau window")->check(CLI::PositiveNumber);
    };

    CLI::App* init = app.add_subcommand("init", "write a default configuration file");
    init->add_option("--out", f.out_path, "target path (default labelrefine.json)");
    init->add_flag("--force", f.force, "overwrite an existing file");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    synth->add_option("--out", f.out_path, "target JSONL")->required();
    synth->add_option("--sessions", f.sessions, "number of sessions")->check(CLI::PositiveNumber);
    synth->add_option("--seed", f.seed, "generator seed");
    synth->add_option("--raters", f.raters, "simulated raters")->check(CLI::NonNegativeNumber);

    CLI::App* run = app.add_subcommand("run", "run the refinement loop");
    run_like(run);
    run->add_option("--run-id", f.run_id, "name of the new run");
    run->add_option("--resume", f.resume, "continue an interrupted run");
    run->add_flag("--serve", f.serve, "co-host the HTTP API");
    run->add_option("--port", f.port, "API port");
    run->add_option("--host", f.host, "API bind address");

    CLI::App* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
    run_like(cv);
    cv->add_option("--folds", f.folds, "number of folds")->check(CLI::Range(2, 1000));
    cv->add_option("--run-id", f.run_id, "name of the cross-validation run");
    cv->add_option("--validation-run", f.validation_run, "full-set run for the overfitting gap");
    cv->add_option("--validation-kappa", f.validation_kappa, "validation kappa for the overfitting gap");
    cv->add_flag("--parallel", f.parallel, "run folds concurrently");

    CLI::App* eval = app.add_subcommand("eval", "evaluate one prompt version");
    common(eval);
    eval->add_flag("--mock", f.mock, "offline mock classifier");
    eval->add_option("--dataset", f.dataset, "sessions JSONL (default: the run's dataset)");
    eval->add_option("--seed", f.seed, "mock seed");
    eval->add_option("--run", f.run_id, "run holding the prompt");
    eval->add_option("--fold", f.fold, "fold of a cross-validation run (default data: its held-out split)");
    eval->add_option("--prompt", f.prompt, "prompt version, e.g. v3");
    eval->add_option("--prompt-file", f.prompt_file, "prompt body from a file");

    CLI::App* report = app.add_subcommand("report", "render a run or cross-validation report");
    common(report);
    report->add_option("run_id", f.run_id, "run id")->required();
    report->add_flag("--json", f.json_out, "print the JSON report");

    CLI::App* serve = app.add_subcommand("serve", "serve the HTTP API over stored runs");
    common(serve);
    serve->add_option("--port", f.port, "port");
    serve->add_option("--host", f.host, "bind address (default 127.0.0.1)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    setup_logging(f.verbose);

    try {
        if (init->parsed()) return cmd_init(f, out);
        if (synth->parsed()) return cmd_synth(f, out);
        if (run->parsed()) return cmd_run(f, out, in);
        if (cv->parsed()) return cmd_cv(f, out, in);
        if (eval->parsed()) return cmd_eval(f, out);
        if (report->parsed()) return cmd_report(f, out);
        if (serve->parsed()) return cmd_serve(f, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NotFound& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "aborted: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr, std::cin);
}

}  // namespace labelrefine
