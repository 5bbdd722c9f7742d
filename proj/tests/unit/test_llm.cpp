#include <gtest/gtest.h>

#include <atomic>

#include <httplib.h>

#include "fixtures.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/http_backend.hpp"
#include "labelrefine/llm.hpp"

using namespace labelrefine;

TEST(ParseLabels, AcceptsJsonInsideProse) {
    auto r = parse_labels(R"(Sure. {"intent": "hl", "topic": "P", "followup": "EA"} Hope that helps.)");
    ASSERT_TRUE(std::holds_alternative<LabelSet>(r));
    const LabelSet l = std::get<LabelSet>(r);
    EXPECT_EQ(l.intent, Intent::HL);
    EXPECT_EQ(l.topic, Topic::P);
    EXPECT_EQ(l.followup, Followup::EA);
}

TEST(ParseLabels, SkipsObjectsWithoutLabels) {
    auto r = parse_labels(R"({"note": "{braces}"} then {"intent":"OT","topic":"C","followup":"S"})");
    ASSERT_TRUE(std::holds_alternative<LabelSet>(r));
    EXPECT_EQ(std::get<LabelSet>(r).followup, Followup::S);
}

TEST(ParseLabels, FailuresCarryReason) {
    for (const char* raw : {"no json here", R"({"intent":"AS","topic":"C"})", R"({"intent":"ZZ","topic":"C","followup":"E"})",
                            "{\"intent\": \"AS\", ", ""}) {
        auto r = parse_labels(raw);
        ASSERT_TRUE(std::holds_alternative<ParseFailure>(r)) << raw;
        EXPECT_FALSE(std::get<ParseFailure>(r).reason.empty());
    }
}

TEST(Cost, ClosedForm) {
    const PriceTable prices{{"m", {2.5, 10.0}}};
    const std::vector<TokenUsage> calls{{1000, 100}, {3000, 50}};
    EXPECT_DOUBLE_EQ(estimate_cost(calls, "m", prices), (4000 * 2.5 + 150 * 10.0) / 1e6);
    EXPECT_THROW(estimate_cost(calls, "other", prices), NotFound);
}

TEST(MockClassifier, DeterministicAndRuleSensitive) {
    const LabeledDataset d = fixtures::synthetic80(1);
    MockClassifierBackend a, b;
    ClassifierConfig cfg;
    cfg.model = "mock-classifier";
    const PromptVersion p0 = baseline_prompt(default_codebook(), "2026-01-01T00:00:00Z");
    const auto ra = classify_all(a, cfg, p0, d.sessions);
    const auto rb = classify_all(b, cfg, p0, d.sessions);
    EXPECT_EQ(ra, rb);

    PromptVersion p1 = p0;
    p1.body += "\n" + rule_marker(default_rule_script().front().token) + " " + default_rule_script().front().text;
    int fixed = 0, broken = 0;
    const auto r1 = classify_all(a, cfg, p1, d.sessions);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const LabelSet g = d.gold.at(ra[i].session_id);
        const bool before = std::get<LabelSet>(ra[i].labels) == g;
        const bool after = std::get<LabelSet>(r1[i].labels) == g;
        fixed += !before && after;
        broken += before && !after;
    }
    EXPECT_GT(fixed, 0);
    EXPECT_EQ(broken, 0);
}

TEST(MockClassifier, UnparseableSessions) {
    const LabeledDataset d = fixtures::synthetic80(1);
    MockClassifierOptions o;
    o.unparseable_ids = {d.sessions[0].id};
    MockClassifierBackend m(o);
    ClassifierConfig cfg;
    cfg.model = "mock-classifier";
    const auto p = classify_session(m, cfg, baseline_prompt(default_codebook(), "t"), d.sessions[0]);
    EXPECT_FALSE(p.parsed());
    EXPECT_EQ(p.usage, o.usage_per_call);
}

TEST(RecordingBackend, TagsPhases) {
    const LabeledDataset d = fixtures::synthetic80(1);
    MockClassifierBackend m;
    RecordingBackend rec(m);
    ClassifierConfig cfg;
    cfg.model = "mock-classifier";
    const PromptVersion p = baseline_prompt(default_codebook(), "t");
    rec.set_phase("refine");
    classify_session(rec, cfg, p, d.sessions[0]);
    rec.set_phase("test");
    classify_session(rec, cfg, p, d.sessions[1]);
    const auto e = rec.entries();
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0].phase, "refine");
    EXPECT_EQ(e[0].session_id, d.sessions[0].id);
    EXPECT_EQ(e[1].phase, "test");
}

TEST(LlmAgent, ParsesTaggedReply) {
    PromptVersion base;
    base.version = 3;
    base.body = "old";
    const auto r = LlmAgent::parse_reply(
        {"<changelog>tighten AS</changelog><reasoning>AS confused with HL</reasoning><prompt>new body</prompt>", {10, 5}},
        base);
    EXPECT_EQ(r.new_body, "new body");
    EXPECT_EQ(r.changelog, "tighten AS");
    EXPECT_EQ(r.base_version, 3);
    EXPECT_THROW(LlmAgent::parse_reply({"no prompt", {}}, base), NoUsableRevision);
}

namespace {

/// Loopback chat server that fails the first `failures` requests with `status`.
struct FakeVendor {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::string last_auth;
    std::string last_body;

    FakeVendor(int failures, int status) {
        server.Post("/v1/chat", [this, failures, status](const httplib::Request& req, httplib::Response& res) {
            const int n = hits++;
            last_auth = req.get_header_value("Authorization");
            last_body = req.body;
            if (n < failures) {
                res.status = status;
                res.set_content(R"({"error":"nope"})", "application/json");
                return;
            }
            res.set_content(R"({"choices":[{"message":{"content":"{\"intent\":\"AS\"}"}}],)"
                            R"("usage":{"prompt_tokens":12,"completion_tokens":3}})",
                            "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeVendor() {
        server.stop();
        thread.join();
    }
    HttpChatBackend backend(int retries = 2) {
        HttpBackendConfig c = HttpBackendConfig::preset("openai", "LABELREFINE_TEST_KEY");
        c.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
        c.max_retries = retries;
        c.backoff_initial_ms = 1;
        c.timeout_seconds = 5;
        return HttpChatBackend(c);
    }
};

ChatRequest simple_request() {
    ChatRequest r;
    r.model = "gpt-test";
    r.messages = {{"system", "label it"}, {"user", "Session: s1"}};
    return r;
}

}  // namespace

TEST(HttpBackend, RetriesServerErrorsThenSucceeds) {
    setenv("LABELREFINE_TEST_KEY", "sk-secret-123", 1);
    FakeVendor v(2, 503);
    const auto before = http_request_count();
    auto backend = v.backend(2);
    const ChatResponse r = backend.complete(simple_request());
    EXPECT_EQ(r.text, R"({"intent":"AS"})");
    EXPECT_EQ(r.usage, (TokenUsage{12, 3}));
    EXPECT_EQ(v.hits.load(), 3);
    EXPECT_EQ(http_request_count() - before, 3u);
    EXPECT_EQ(v.last_auth, "Bearer sk-secret-123");
    const auto body = nlohmann::json::parse(v.last_body);
    EXPECT_EQ(body["model"], "gpt-test");
    EXPECT_EQ(body["messages"].size(), 2u);
}

TEST(HttpBackend, GivesUpAfterRetryBudget) {
    FakeVendor v(10, 429);
    auto backend = v.backend(1);
    EXPECT_THROW(backend.complete(simple_request()), TransportError);
    EXPECT_EQ(v.hits.load(), 2);
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
    FakeVendor v(10, 401);
    auto backend = v.backend(3);
    EXPECT_THROW(backend.complete(simple_request()), TransportError);
    EXPECT_EQ(v.hits.load(), 1);
}

TEST(HttpBackend, UnreachableHostIsTransportError) {
    HttpBackendConfig c = HttpBackendConfig::preset("openai", "LABELREFINE_TEST_KEY");
    c.url = "http://127.0.0.1:1/v1/chat";
    c.max_retries = 0;
    c.timeout_seconds = 1;
    HttpChatBackend b(c);
    EXPECT_THROW(b.complete(simple_request()), TransportError);
}

TEST(HttpBackend, RedactsSecrets) {
    EXPECT_EQ(redact("key=abc123 and abc123", {"abc123"}), "key=*** and ***");
    setenv("LABELREFINE_TEST_VAR", "xyz", 1);
    EXPECT_EQ(expand_env("a ${LABELREFINE_TEST_VAR} b"), "a xyz b");
}
