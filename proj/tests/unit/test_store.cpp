#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/serialization.hpp"
#include "labelrefine/store.hpp"

using namespace labelrefine;

namespace {

PromptVersion version(int v, std::string body) {
    PromptVersion p;
    p.version = v;
    if (v > 0) p.parent = v - 1;
    p.body = std::move(body);
    p.changelog = "change \"quoted\"\nsecond line";
    p.reasoning = "because";
    p.created_at = "2026-01-01T00:00:0" + std::to_string(v) + "Z";
    p.author = v == 0 ? Author::human : Author::agent;
    return p;
}

}  // namespace

TEST(PromptFile, RoundTrip) {
    const PromptVersion p = version(3, "line one\n---\nline three with --- inside\n");
    EXPECT_EQ(parse_prompt_file(render_prompt_file(p)), p);
    const PromptVersion root = version(0, "x");
    EXPECT_EQ(parse_prompt_file(render_prompt_file(root)), root);
    EXPECT_THROW(parse_prompt_file("no front matter"), SchemaError);
}

TEST(RunDir, PromptVersionsAreImmutable) {
    RunDir dir(fixtures::temp_dir("store-immutable"));
    dir.create({{"run_id", "r"}});
    dir.save_prompt_version(version(0, "base"));
    EXPECT_NO_THROW(dir.save_prompt_version(version(0, "base")));
    EXPECT_THROW(dir.save_prompt_version(version(0, "different")), Conflict);
    EXPECT_EQ(read_file(dir.prompt_path(0)), render_prompt_file(version(0, "base")));
    EXPECT_EQ(dir.prompt_path(12).filename(), "v012.md");
    EXPECT_THROW(dir.create({{"run_id", "r"}}), Conflict);
}

TEST(RunDir, TornTrailingLineIsIgnoredThenRepaired) {
    RunDir dir(fixtures::temp_dir("store-torn"));
    dir.create({{"run_id", "r"}});
    const RunRecord fx = fixtures::progression_fixture();
    dir.append_iteration(fx.iterations[0]);
    dir.append_iteration(fx.iterations[1]);
    {
        std::ofstream out(dir.path() / "iterations.jsonl", std::ios::app | std::ios::binary);
        out << R"({"iteration":2,"prompt_ver)";
    }
    auto loaded = dir.load_iterations();
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[1], fx.iterations[1]);
    dir.repair_log();
    dir.append_iteration(fx.iterations[2]);
    loaded = dir.load_iterations();
    ASSERT_EQ(loaded.size(), 3u);
    EXPECT_EQ(loaded[2], fx.iterations[2]);
}

TEST(RunDir, LoadRunReassemblesRecord) {
    RunDir dir(fixtures::temp_dir("store-load"));
    dir.create({{"run_id", "r"}, {"dataset", {{"sha256", "abc"}}}});
    RunRecord fx = fixtures::progression_fixture();
    fx.run_id = "r";
    for (const auto& v : fx.versions) dir.on_prompt_version(v);
    for (const auto& it : fx.iterations) dir.on_iteration(it);
    const RunRecord partial = dir.load_run();
    EXPECT_FALSE(partial.stop_reason);
    dir.on_finish(fx);
    const RunRecord r = dir.load_run();
    EXPECT_EQ(r.versions, fx.versions);
    EXPECT_EQ(r.iterations, fx.iterations);
    EXPECT_EQ(r.best_version, 7);
    EXPECT_EQ(r.stop_reason, StopReason::plateau);
    EXPECT_EQ(r.dataset_fingerprint, "abc");
}

TEST(Secrets, RedactedRecursively) {
    const nlohmann::json in = {{"api_key", "sk-live"},
                               {"api_key_env", "OPENAI_API_KEY"},
                               {"nested", {{"headers", {{"Authorization", "Bearer sk-live"}, {"x-api-key", "${KEY}"}}}}},
                               {"model", "m"},
                               {"list", {{{"password", "hunter2"}}}}};
    const std::string out = redact_secrets(in).dump();
    EXPECT_EQ(out.find("sk-live"), std::string::npos);
    EXPECT_EQ(out.find("hunter2"), std::string::npos);
    EXPECT_NE(out.find("${KEY}"), std::string::npos);
    EXPECT_NE(out.find("\"model\":\"m\""), std::string::npos);
}

TEST(Secrets, ManifestNeverHoldsKeys) {
    RunDir dir(fixtures::temp_dir("store-secret"));
    dir.create({{"run_id", "r"}, {"agent", {{"token", "tok-123"}}}});
    EXPECT_EQ(read_file(dir.path() / "manifest.json").find("tok-123"), std::string::npos);
}

TEST(RunStore, ListsAndRejectsBadIds) {
    const auto root = fixtures::temp_dir("store-list");
    RunStore store(root);
    store.run("b").create({{"run_id", "b"}});
    store.run("a").create({{"run_id", "a"}});
    EXPECT_EQ(store.list(), (std::vector<std::string>{"a", "b"}));
    EXPECT_THROW(store.open("missing"), NotFound);
    EXPECT_THROW(store.run("../etc"), InvalidArgument);
    EXPECT_EQ(store.status("a").state, "running");
}

TEST(Time, UtcRoundTrip) {
    EXPECT_EQ(parse_utc(format_utc(1767225600)), 1767225600);
    EXPECT_EQ(format_utc(0), "1970-01-01T00:00:00Z");
    EXPECT_EQ(make_run_id("2026-10-16T07:57:19Z", "cv"), "run-20261016-075719-cv");
}

TEST(Hash, Sha256) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
