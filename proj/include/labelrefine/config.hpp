#pragma once

// RunConfig: one JSON document holding everything a run needs. Unknown keys
// are rejected and errors name the offending key path ("classifier.model").

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "labelrefine/api.hpp"
#include "labelrefine/engine.hpp"
#include "labelrefine/http_backend.hpp"
#include "labelrefine/mock.hpp"
#include "labelrefine/review.hpp"

namespace labelrefine {

struct BackendSettings {
    std::string provider = "mock";  // mock | http
    /// openai | anthropic | gemini: fills url, headers, body and pointers.
    std::string preset;
    std::string api_key_env;
    std::optional<std::string> url;
    std::optional<std::map<std::string, std::string>> headers;
    std::optional<nlohmann::json> body_template;
    std::optional<std::string> text_pointer;
    std::optional<std::string> input_tokens_pointer;
    std::optional<std::string> output_tokens_pointer;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 256;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    bool debug = false;

    /// Resolved HTTP settings (preset first, explicit fields on top).
    HttpBackendConfig http() const;
};

struct ClassifierSettings : BackendSettings {
    int parallelism = 4;
    double mock_rule_accuracy = 0.97;
    bool mock_perfect = false;
    std::set<std::string> mock_unparseable_ids;
    TokenUsage mock_usage{2000, 200};

    ClassifierConfig classifier_config() const;
};

struct AgentSettings : BackendSettings {
    std::string instruction = AgentConfig{}.instruction;
    TokenUsage mock_usage{6000, 800};

    AgentConfig agent_config() const;
};

struct RunConfig {
    std::string dataset;  // empty with a mock classifier: synthetic data
    std::string output_root = "labelrefine-out";
    std::uint64_t seed = 1;
    ReviewMode review = ReviewMode::auto_;
    std::string baseline_prompt;  // optional prompt file; default: codebook baseline
    ClassifierSettings classifier;
    AgentSettings agent;
    StopPolicy stop;
    int max_reproposals = 2;
    PriceTable prices;
    ApiOptions serve;
    std::size_t synthetic_sessions = 80;
    int synthetic_raters = 2;
    int folds = 4;
    bool cv_parallel = false;

    RunConfig();
    bool mock_classifier() const { return classifier.provider == "mock"; }
    /// Cross-field checks: models priced, http settings complete, ranges.
    void validate() const;
};

/// Strict parse over the defaults; throws ConfigError naming the key path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& c);

/// LABELREFINE_DATASET, LABELREFINE_OUTPUT_ROOT, LABELREFINE_SEED,
/// LABELREFINE_REVIEW, LABELREFINE_MAX_ITERS override file values.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_env(RunConfig& c, const EnvLookup& env);
EnvLookup process_env();

/// Switches classifier and agent to the offline mocks.
void use_mocks(RunConfig& c);

std::unique_ptr<ChatBackend> make_classifier_backend(const ClassifierSettings& s, std::uint64_t seed);

struct AgentBundle {
    std::unique_ptr<ChatBackend> backend;  // null for the scripted mock
    std::unique_ptr<Agent> agent;
};
AgentBundle make_agent(const AgentSettings& s);

}  // namespace labelrefine
