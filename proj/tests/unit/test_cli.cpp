#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "labelrefine/cli.hpp"
#include "labelrefine/serialization.hpp"
#include "labelrefine/store.hpp"

using namespace labelrefine;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args, const std::string& input = "") {
    std::ostringstream out, err;
    std::istringstream in(input);
    const int code = run_cli(args, out, err, in);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"run", "--review", "email"}).code, kExitUsage);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_EQ(cli({"report"}).code, kExitUsage);
}

TEST(Cli, ConfigErrorsExitOne) {
    const auto dir = fixtures::temp_dir("cli-config");
    std::ofstream(dir / "bad.json") << R"({"classifier": {"modle": "x"}})";
    const Result r = cli({"run", "--config", (dir / "bad.json").string(), "--output-root", dir.string()});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("classifier.modle"), std::string::npos);
    EXPECT_EQ(cli({"run", "--mock", "--dataset", (dir / "missing.jsonl").string(), "--output-root", dir.string()}).code,
              kExitUsage);
}

TEST(Cli, CvRejectsTooManyFolds) {
    const auto dir = fixtures::temp_dir("cli-folds");
    const Result r = cli({"cv", "--mock", "--folds", "81", "--output-root", dir.string(), "--run-id", "c"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("81"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(dir / "runs" / "c"));
}

TEST(Cli, RunPrintsProgressAndBest) {
    const auto dir = fixtures::temp_dir("cli-run");
    const Result r = cli({"run", "--mock", "--output-root", dir.string(), "--run-id", "a", "--max-iters", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("iter 0: v0 overall"), std::string::npos);
    EXPECT_NE(r.out.find("lowest"), std::string::npos);
    EXPECT_NE(r.out.find("best version: v"), std::string::npos);
    EXPECT_NE(r.out.find("[stop: max_iterations]"), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(dir / "runs" / "a" / "report.txt"));
    // at most max_iters + 1 evaluated versions
    RunDir run = RunStore(dir).open("a");
    EXPECT_EQ(run.load_iterations().size(), 3u);
    EXPECT_EQ(cli({"run", "--mock", "--output-root", dir.string(), "--run-id", "a"}).code, kExitUsage);
}

TEST(Cli, FlagsBeatEnvBeatFile) {
    const auto dir = fixtures::temp_dir("cli-precedence");
    std::ofstream(dir / "c.json") << R"({"seed": 5, "stop": {"max_iterations": 1}})";
    const std::string cfg = (dir / "c.json").string();
    auto seed_of = [&](const std::string& id) {
        return RunStore(dir).open(id).manifest()["seed"].get<int>();
    };
    ASSERT_EQ(cli({"run", "--mock", "--config", cfg, "--output-root", dir.string(), "--run-id", "f"}).code, 0);
    EXPECT_EQ(seed_of("f"), 5);
    setenv("LABELREFINE_SEED", "6", 1);
    ASSERT_EQ(cli({"run", "--mock", "--config", cfg, "--output-root", dir.string(), "--run-id", "e"}).code, 0);
    EXPECT_EQ(seed_of("e"), 6);
    ASSERT_EQ(cli({"run", "--mock", "--config", cfg, "--output-root", dir.string(), "--run-id", "g", "--seed", "7"}).code,
              0);
    EXPECT_EQ(seed_of("g"), 7);
    unsetenv("LABELREFINE_SEED");
}

TEST(Cli, ResumeFinishesInterruptedRun) {
    const auto dir = fixtures::temp_dir("cli-resume");
    ASSERT_EQ(cli({"run", "--mock", "--output-root", dir.string(), "--run-id", "full"}).code, 0);
    ASSERT_EQ(cli({"run", "--mock", "--output-root", dir.string(), "--run-id", "cut"}).code, 0);
    const auto cut = dir / "runs" / "cut";
    // simulate a crash after two iterations
    std::ifstream in(cut / "iterations.jsonl");
    std::string a, b;
    std::getline(in, a);
    std::getline(in, b);
    in.close();
    std::ofstream(cut / "iterations.jsonl", std::ios::trunc) << a << "\n" << b << "\n{\"iter";
    std::filesystem::remove(cut / "run.json");
    const Result r = cli({"run", "--mock", "--output-root", dir.string(), "--resume", "cut"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("resuming cut"), std::string::npos);
    EXPECT_EQ(read_file(cut / "iterations.jsonl"), read_file(dir / "runs" / "full" / "iterations.jsonl"));
    EXPECT_EQ(cli({"run", "--mock", "--output-root", dir.string(), "--resume", "nope"}).code, kExitUsage);
}

TEST(Cli, EvalReportAndCv) {
    const auto dir = fixtures::temp_dir("cli-eval");
    const std::string root = dir.string();
    ASSERT_EQ(cli({"run", "--mock", "--output-root", root, "--run-id", "a"}).code, 0);

    Result r = cli({"eval", "--mock", "--output-root", root, "--run", "a", "--prompt", "v3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("v3 on 80 sessions: overall 0.73"), std::string::npos);
    EXPECT_EQ(cli({"eval", "--mock", "--output-root", root, "--run", "a", "--prompt", "v42"}).code, kExitUsage);

    std::ofstream(dir / "perfect.json") << R"({"classifier": {"mock": {"perfect": true}}})";
    r = cli({"eval", "--config", (dir / "perfect.json").string(), "--output-root", root, "--run", "a", "--prompt",
             "v0"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("overall 1.00"), std::string::npos);

    // another dataset
    SyntheticProfile p;
    save_dataset(generate_synthetic(9, 40, p), dir / "other.jsonl");
    r = cli({"eval", "--mock", "--output-root", root, "--run", "a", "--prompt", "v3", "--dataset",
             (dir / "other.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("on 40 sessions"), std::string::npos);

    r = cli({"report", "a", "--output-root", root});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("v3*"), std::string::npos);
    EXPECT_EQ(cli({"report", "missing", "--output-root", root}).code, kExitUsage);

    r = cli({"cv", "--mock", "--folds", "4", "--output-root", root, "--run-id", "c", "--validation-run", "a"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("Mean +/- SD"), std::string::npos);
    const auto cv = nlohmann::json::parse(read_file(dir / "runs" / "c" / "cv.json"));
    EXPECT_EQ(cv["validation_kappa"].get<double>(), RunStore(dir).status("a").best_kappa.value());

    // best fold prompt on its held-out fold reproduces the stored test kappa
    const auto& fold = cv["folds"][1];
    r = cli({"eval", "--mock", "--output-root", root, "--run", "c", "--fold", "1", "--prompt",
             "v" + std::to_string(fold["best_version"].get<int>())});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("overall " + format_fixed(fold["test"]["overall_kappa"].get<double>())), std::string::npos);
    const auto saved = nlohmann::json::parse(read_file(*std::filesystem::directory_iterator(
        dir / "runs" / "c" / "folds" / "fold_1" / "evals")));
    EXPECT_EQ(saved["eval"]["overall_kappa"], fold["test"]["overall_kappa"]);

    r = cli({"report", "c", "--output-root", root});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("4-fold cross-validation"), std::string::npos);

    // identical fold assignment when repeated with the same seed
    ASSERT_EQ(cli({"cv", "--mock", "--output-root", root, "--run-id", "c2"}).code, 0);
    const auto cv2 = nlohmann::json::parse(read_file(dir / "runs" / "c2" / "cv.json"));
    EXPECT_EQ(cv2["assignment"], cv["assignment"]);
}

TEST(Cli, InitAndSynth) {
    const auto dir = fixtures::temp_dir("cli-init");
    const std::string cfg = (dir / "lr.json").string();
    EXPECT_EQ(cli({"init", "--out", cfg}).code, 0);
    EXPECT_EQ(cli({"init", "--out", cfg}).code, kExitUsage);
    EXPECT_EQ(cli({"init", "--out", cfg, "--force"}).code, 0);
    EXPECT_EQ(cli({"synth", "--out", (dir / "d.jsonl").string(), "--sessions", "30", "--raters", "2"}).code, 0);
    EXPECT_EQ(load_dataset(dir / "d.jsonl").size(), 30u);
    const Result r = cli({"run", "--config", cfg, "--dataset", (dir / "d.jsonl").string(), "--output-root",
                          dir.string(), "--run-id", "x", "--max-iters", "1"});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, CliReviewFromStdin) {
    const auto dir = fixtures::temp_dir("cli-review");
    const Result r = cli({"run", "--mock", "--review", "cli", "--output-root", dir.string(), "--run-id", "a"},
                         "a\nv no thanks\nq\n");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto its = RunStore(dir).open("a").load_iterations();
    ASSERT_EQ(its.size(), 2u);
    EXPECT_EQ(its[0].applied_version, 1);
    EXPECT_EQ(its[1].vetoed_attempts.size(), 2u);
    EXPECT_EQ(its[1].stop_reason, StopReason::manual);
}
