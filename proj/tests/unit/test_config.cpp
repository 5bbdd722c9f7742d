#include <gtest/gtest.h>

#include "labelrefine/config.hpp"
#include "labelrefine/errors.hpp"

using namespace labelrefine;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
    try {
        parse_config(j).validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars](const std::string& k) -> std::optional<std::string> {
        auto it = vars.find(k);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace

TEST(Config, DefaultsAreValidAndRoundTrip) {
    const RunConfig c;
    EXPECT_NO_THROW(c.validate());
    const json j = config_to_json(c);
    EXPECT_EQ(config_to_json(parse_config(j)), j);
}

TEST(Config, UnknownKeysNamePath) {
    EXPECT_NE(config_error({{"classifier", {{"modle", "x"}}}}).find("unknown key 'classifier.modle'"), std::string::npos);
    EXPECT_NE(config_error({{"colour", 1}}).find("unknown key 'colour'"), std::string::npos);
    EXPECT_NE(config_error({{"classifier", {{"mock", {{"speed", 1}}}}}}).find("classifier.mock.speed"),
              std::string::npos);
}

TEST(Config, MissingValuesNamePath) {
    EXPECT_NE(config_error({{"classifier", {{"model", "gpt-x"}}}}).find("prices.gpt-x is required"), std::string::npos);
    EXPECT_NE(config_error({{"agent", {{"model", ""}}}}).find("agent.model is required"), std::string::npos);
    EXPECT_NE(config_error({{"classifier", {{"provider", "http"}, {"preset", "openai"}, {"api_key_env", "K"}}}})
                  .find("dataset is required"),
              std::string::npos);
    EXPECT_NE(config_error({{"dataset", "d.jsonl"}, {"classifier", {{"provider", "http"}}}}).find("classifier.url"),
              std::string::npos);
    EXPECT_NE(config_error({{"seed", "one"}}).find("seed"), std::string::npos);
    EXPECT_NE(config_error({{"review", "email"}}).find("review"), std::string::npos);
}

TEST(Config, PresetNeedsKeyVariable) {
    json j = {{"dataset", "d.jsonl"},
              {"classifier", {{"provider", "http"}, {"preset", "openai"}, {"model", "gpt-x"}}},
              {"prices", {{"gpt-x", {{"usd_per_million_input", 1.0}, {"usd_per_million_output", 2.0}}}}}};
    EXPECT_NE(config_error(j).find("classifier.api_key_env"), std::string::npos);
    j["classifier"]["api_key_env"] = "OPENAI_API_KEY";
    EXPECT_EQ(config_error(j), "");
    const RunConfig c = parse_config(j);
    EXPECT_EQ(c.classifier.http().headers.at("Authorization"), "Bearer ${OPENAI_API_KEY}");
}

TEST(Config, EnvOverridesFile) {
    RunConfig c = parse_config({{"seed", 5}, {"review", "cli"}});
    apply_env(c, env_of({{"LABELREFINE_SEED", "6"}, {"LABELREFINE_REVIEW", "web"}}));
    EXPECT_EQ(c.seed, 6u);
    EXPECT_EQ(c.review, ReviewMode::web);
    apply_env(c, env_of({}));
    EXPECT_EQ(c.seed, 6u);
    EXPECT_THROW(apply_env(c, env_of({{"LABELREFINE_MAX_ITERS", "ten"}})), ConfigError);
}

TEST(Config, MockSettingsReachBackend) {
    RunConfig c = parse_config({{"classifier", {{"mock", {{"perfect", true}, {"unparseable_ids", {"s001"}}}}}}});
    EXPECT_TRUE(c.classifier.mock_perfect);
    EXPECT_TRUE(c.classifier.mock_unparseable_ids.contains("s001"));
    auto backend = make_classifier_backend(c.classifier, 3);
    auto* mock = dynamic_cast<MockClassifierBackend*>(backend.get());
    ASSERT_NE(mock, nullptr);
    EXPECT_TRUE(mock->options().perfect);
    EXPECT_EQ(mock->options().seed, 3u);
}
