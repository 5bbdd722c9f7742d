#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/serialization.hpp"
#include "labelrefine/store.hpp"

using namespace labelrefine;

namespace {

std::optional<StopReason> stop_on(std::vector<double> h, StopPolicy p = {0.02, 2, 10}) { return should_stop(h, p); }

class CollectingSink : public RunSink {
public:
    std::vector<PromptVersion> versions;
    std::vector<IterationRecord> iterations;
    int finished = 0;
    void on_prompt_version(const PromptVersion& v) override { versions.push_back(v); }
    void on_iteration(const IterationRecord& r) override { iterations.push_back(r); }
    void on_finish(const RunRecord&) override { ++finished; }
};

}  // namespace

TEST(ShouldStop, Plateau) {
    EXPECT_EQ(stop_on({0.70, 0.85, 0.86, 0.867}), StopReason::plateau);
    EXPECT_EQ(stop_on({0.93, 0.92, 0.93, 0.91}), StopReason::plateau);
    EXPECT_EQ(stop_on({0.70, 0.85}), std::nullopt);
    EXPECT_EQ(stop_on({0.70, 0.75, 0.85}), std::nullopt);
    EXPECT_EQ(stop_on({0.70}), std::nullopt);
    // a drop counts as "less than epsilon"
    EXPECT_EQ(stop_on({0.5, 0.6, 0.55, 0.54}), StopReason::plateau);
}

TEST(ShouldStop, EpsilonZeroDisablesPlateau) {
    EXPECT_EQ(stop_on({0.5, 0.5, 0.5, 0.5}, {0.0, 2, 10}), std::nullopt);
    EXPECT_EQ(stop_on({0.5, 0.5, 0.5, 0.5}, {0.0, 2, 3}), StopReason::max_iterations);
}

TEST(ShouldStop, PolicyValidation) {
    EXPECT_THROW((StopPolicy{-0.1, 2, 10}.validate()), ConfigError);
    EXPECT_THROW((StopPolicy{0.02, 0, 10}.validate()), ConfigError);
    EXPECT_THROW((StopPolicy{0.02, 2, 0}.validate()), ConfigError);
}

TEST(Regressions, ProgressionFixtureHasOneEvent) {
    const RunRecord run = fixtures::progression_fixture();
    EXPECT_EQ(select_best(run), 7);
    const auto events = detect_regressions(run.version_history(), 0.05);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0].metric, "followup");
    EXPECT_EQ(events[0].from_version, 9);
    EXPECT_EQ(events[0].to_version, 10);
    EXPECT_NEAR(events[0].delta, -0.08, 1e-12);
}

TEST(Regressions, ThresholdIsStrict) {
    std::vector<VersionMetrics> h{{0, {{Dimension::intent, 0.80}}, 0.8}, {1, {{Dimension::intent, 0.75}}, 0.8}};
    EXPECT_TRUE(detect_regressions(h, 0.05).empty());
    h[1].per_dimension[Dimension::intent] = 0.7499;
    EXPECT_EQ(detect_regressions(h, 0.05).size(), 1u);
}

TEST(SelectBest, TiesGoToLowestVersion) {
    RunRecord run = fixtures::progression_fixture();
    run.iterations[2].eval.overall_kappa = 0.93;
    EXPECT_EQ(select_best(run), 7);
    EXPECT_THROW(select_best(std::span<const IterationRecord>{}), InvalidArgument);
}

TEST(Engine, MockRunImprovesThenPlateaus) {
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    CollectingSink sink;
    EngineDeps deps = rig.deps();
    deps.sink = &sink;
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), deps.clock()), {0.02, 2, 10}, deps, "r");
    ASSERT_GE(run.iterations.size(), 4u);
    for (int i = 1; i <= 3; ++i) EXPECT_GT(run.iterations[static_cast<std::size_t>(i)].eval.overall_kappa,
                                           run.iterations[static_cast<std::size_t>(i - 1)].eval.overall_kappa);
    EXPECT_EQ(run.stop_reason, StopReason::plateau);
    EXPECT_EQ(sink.iterations, run.iterations);
    EXPECT_EQ(sink.finished, 1);
    EXPECT_EQ(run.best_version, 3);
    check_lineage(run.versions);
    for (std::size_t i = 0; i + 1 < run.iterations.size(); ++i)
        EXPECT_LT(run.iterations[i].finished_at, run.iterations[i + 1].started_at);
}

TEST(Engine, PerfectClassifierConverges) {
    const LabeledDataset d = fixtures::synthetic80();
    MockClassifierOptions o;
    o.perfect = true;
    fixtures::MockRig rig(o);
    EngineDeps deps = rig.deps();
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {}, deps);
    ASSERT_EQ(run.iterations.size(), 1u);
    EXPECT_EQ(run.stop_reason, StopReason::converged);
    EXPECT_DOUBLE_EQ(run.iterations[0].eval.overall_kappa, 1.0);
}

TEST(Engine, AllVetoesKeepBaseline) {
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    int asked = 0;
    ScriptedReview veto([&](const ReviewRequest&) {
        ++asked;
        return ReviewOutcome{Decision::vetoed, "not convinced", std::nullopt, "tester", false};
    });
    EngineDeps deps = rig.deps(&veto);
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {0.02, 2, 3}, deps);
    EXPECT_EQ(run.stop_reason, StopReason::max_iterations);
    EXPECT_EQ(run.best_version, 0);
    EXPECT_EQ(run.versions.size(), 1u);
    ASSERT_EQ(run.iterations.size(), 4u);
    EXPECT_EQ(asked, 9);  // three proposals in each of iterations 0..2
    EXPECT_EQ(run.iterations[0].vetoed_attempts.size(), 3u);
    EXPECT_FALSE(run.iterations[0].eval_reused);
    EXPECT_TRUE(run.iterations[1].eval_reused);
    // only the first evaluation costs classifier tokens
    EXPECT_EQ(run.classifier_usage(), run.iterations[0].eval.usage);
}

TEST(Engine, VetoNoteSteersNextProposal) {
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    std::vector<std::string> seen;
    ScriptedReview once([&](const ReviewRequest& r) {
        seen.push_back(r.proposal.changelog);
        if (seen.size() == 1) return ReviewOutcome{Decision::vetoed, "try something else", std::nullopt, "t", false};
        return ReviewOutcome{Decision::approved, "", std::nullopt, "t", true};
    });
    EngineDeps deps = rig.deps(&once);
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {}, deps);
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_NE(seen[0], seen[1]);
    EXPECT_EQ(run.stop_reason, StopReason::manual);
    EXPECT_EQ(run.iterations[0].vetoed_attempts.size(), 1u);
    EXPECT_EQ(run.iterations[0].applied_version, 1);
}

TEST(Engine, EditedPromptIsApplied) {
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    ScriptedReview edit([&](const ReviewRequest& r) {
        return ReviewOutcome{Decision::edited, "reworded", r.proposal.new_body + "\nHuman note.", "t", true};
    });
    EngineDeps deps = rig.deps(&edit);
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {}, deps);
    ASSERT_EQ(run.versions.size(), 2u);
    EXPECT_EQ(run.versions[1].author, Author::human);
    EXPECT_TRUE(run.versions[1].body.ends_with("Human note."));
}

TEST(Engine, TransportFailureEndsWithError) {
    struct Broken : ChatBackend {
        ChatResponse complete(const ChatRequest&) override { throw TransportError("connection refused"); }
    } broken;
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    EngineDeps deps = rig.deps();
    EngineDeps bad{broken, deps.classifier_config, rig.agent, rig.auto_review, deps.route,
                   default_codebook(), nullptr, logical_clock(), {}};
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {}, bad);
    EXPECT_EQ(run.stop_reason, StopReason::error);
    EXPECT_NE(run.error.find("connection refused"), std::string::npos);
    EXPECT_TRUE(run.iterations.empty());
}

TEST(Engine, CostIsClosedFormSum) {
    const LabeledDataset d = fixtures::synthetic80();
    fixtures::MockRig rig;
    EngineDeps deps = rig.deps();
    const RunRecord run = run_refinement(d, baseline_prompt(default_codebook(), "t"), {}, deps);
    std::int64_t evals = 0, proposals = 0;
    for (const auto& it : run.iterations) {
        evals += !it.eval_reused;
        proposals += it.proposal ? 1 + static_cast<std::int64_t>(it.vetoed_attempts.size()) : 0;
    }
    const double expected = (evals * 80 * (2000 * 2.0 + 200 * 8.0) + proposals * (6000 * 3.0 + 800 * 15.0)) / 1e6;
    EXPECT_DOUBLE_EQ(run.iterations.back().cumulative_cost, expected);
}

TEST(Engine, ResumeAfterCrashReproducesLog) {
    const LabeledDataset d = fixtures::synthetic80();
    const auto root = fixtures::temp_dir("engine-resume");
    const StopPolicy policy{0.02, 2, 10};
    auto p0_for = [](Clock& c) { return baseline_prompt(default_codebook(), c()); };

    RunDir full(root / "full");
    full.create({{"run_id", "r"}});
    {
        fixtures::MockRig rig;
        EngineDeps deps = rig.deps();
        deps.sink = &full;
        run_refinement(d, p0_for(deps.clock), policy, deps, "r");
    }

    // Crash after two iterations: keep two log lines plus half of the third,
    // and the prompt file written just before the crash.
    RunDir part(root / "part");
    part.create({{"run_id", "r"}});
    std::ifstream in(full.path() / "iterations.jsonl");
    std::string l1, l2, l3;
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    {
        std::ofstream out(part.path() / "iterations.jsonl", std::ios::binary);
        out << l1 << "\n" << l2 << "\n" << l3.substr(0, l3.size() / 2);
    }
    for (int v = 0; v <= 3; ++v) part.save_prompt_version(parse_prompt_file(read_file(full.prompt_path(v))));

    part.repair_log();
    RunRecord prior = part.load_run();
    ASSERT_EQ(prior.iterations.size(), 2u);
    fixtures::MockRig rig;
    EngineDeps deps = rig.deps();
    deps.sink = &part;
    deps.clock = logical_clock(parse_utc(prior.iterations.back().finished_at) + 1);
    const RunRecord resumed = run_refinement(d, prior.versions.front(), policy, deps, "r", prior);

    EXPECT_EQ(read_file(part.path() / "iterations.jsonl"), read_file(full.path() / "iterations.jsonl"));
    EXPECT_EQ(resumed.best_version, full.load_run().best_version);
}
