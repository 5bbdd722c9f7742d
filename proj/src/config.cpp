#include "labelrefine/config.hpp"

#include <cstdlib>
#include <fstream>

namespace labelrefine {

using json = nlohmann::json;

namespace {

/// Strict view of one JSON object: every key read is recorded and finish()
/// rejects the rest.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError((path_.empty() ? "config" : path_) + " must be an object");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(key_path(key) + " must be a string");
            out = v->get<std::string>();
        }
    }
    void get(const std::string& key, std::optional<std::string>& out) {
        if (const json* v = find(key); v && !v->is_null()) {
            if (!v->is_string()) throw ConfigError(key_path(key) + " must be a string");
            out = v->get<std::string>();
        }
    }
    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(key_path(key) + " must be a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(key_path(key) + " must be an integer");
            out = v->get<int>();
        }
    }
    void get(const std::string& key, std::int64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(key_path(key) + " must be an integer");
            out = v->get<std::int64_t>();
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
                throw ConfigError(key_path(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(key_path(key) + " must be true or false");
            out = v->get<bool>();
        }
    }

    std::optional<Section> child(const std::string& key) {
        if (const json* v = find(key)) return Section(*v, key_path(key));
        return std::nullopt;
    }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.contains(k)) throw ConfigError("unknown key '" + key_path(k) + "'");
    }

    const json& raw() const { return j_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_usage(Section& s, const std::string& key, TokenUsage& u) {
    if (auto c = s.child(key)) {
        c->get("input_tokens", u.input_tokens);
        c->get("output_tokens", u.output_tokens);
        c->finish();
    }
}

void read_backend(Section& s, BackendSettings& b) {
    s.get("provider", b.provider);
    if (b.provider != "mock" && b.provider != "http")
        throw ConfigError(s.key_path("provider") + " must be \"mock\" or \"http\"");
    s.get("preset", b.preset);
    s.get("api_key_env", b.api_key_env);
    s.get("url", b.url);
    if (const json* h = s.find("headers")) {
        if (!h->is_object()) throw ConfigError(s.key_path("headers") + " must be an object");
        std::map<std::string, std::string> headers;
        for (const auto& [k, v] : h->items()) {
            if (!v.is_string()) throw ConfigError(s.key_path("headers." + k) + " must be a string");
            headers[k] = v.get<std::string>();
        }
        b.headers = headers;
    }
    if (const json* t = s.find("body_template")) {
        if (!t->is_object()) throw ConfigError(s.key_path("body_template") + " must be an object");
        b.body_template = *t;
    }
    s.get("text_pointer", b.text_pointer);
    s.get("input_tokens_pointer", b.input_tokens_pointer);
    s.get("output_tokens_pointer", b.output_tokens_pointer);
    s.get("model", b.model);
    s.get("temperature", b.temperature);
    s.get("max_output_tokens", b.max_output_tokens);
    s.get("timeout_seconds", b.timeout_seconds);
    s.get("max_retries", b.max_retries);
    s.get("debug", b.debug);
}

json backend_json(const BackendSettings& b) {
    json j{{"provider", b.provider},
           {"model", b.model},
           {"temperature", b.temperature},
           {"max_output_tokens", b.max_output_tokens},
           {"timeout_seconds", b.timeout_seconds},
           {"max_retries", b.max_retries},
           {"debug", b.debug}};
    if (!b.preset.empty()) j["preset"] = b.preset;
    if (!b.api_key_env.empty()) j["api_key_env"] = b.api_key_env;
    if (b.url) j["url"] = *b.url;
    if (b.headers) j["headers"] = *b.headers;
    if (b.body_template) j["body_template"] = *b.body_template;
    if (b.text_pointer) j["text_pointer"] = *b.text_pointer;
    if (b.input_tokens_pointer) j["input_tokens_pointer"] = *b.input_tokens_pointer;
    if (b.output_tokens_pointer) j["output_tokens_pointer"] = *b.output_tokens_pointer;
    return j;
}

void validate_backend(const BackendSettings& b, const std::string& path) {
    if (b.model.empty()) throw ConfigError(path + ".model is required");
    if (b.provider == "http" && b.preset.empty() && !b.url)
        throw ConfigError(path + ".url is required when " + path + ".provider is \"http\" and no preset is set");
    if (b.provider == "http" && b.preset.empty() && !b.body_template)
        throw ConfigError(path + ".body_template is required when no preset is set");
    if (!b.preset.empty() && b.api_key_env.empty())
        throw ConfigError(path + ".api_key_env is required with a preset");
    if (b.max_output_tokens < 1) throw ConfigError(path + ".max_output_tokens must be >= 1");
    if (b.timeout_seconds <= 0) throw ConfigError(path + ".timeout_seconds must be > 0");
    if (b.max_retries < 0) throw ConfigError(path + ".max_retries must be >= 0");
    if (b.temperature < 0) throw ConfigError(path + ".temperature must be >= 0");
}

}  // namespace

HttpBackendConfig BackendSettings::http() const {
    HttpBackendConfig c = preset.empty() ? HttpBackendConfig{} : HttpBackendConfig::preset(preset, api_key_env);
    if (url) c.url = *url;
    if (headers)
        for (const auto& [k, v] : *headers) c.headers[k] = v;
    if (body_template) c.body_template = *body_template;
    if (text_pointer) c.text_pointer = *text_pointer;
    if (input_tokens_pointer) c.input_tokens_pointer = *input_tokens_pointer;
    if (output_tokens_pointer) c.output_tokens_pointer = *output_tokens_pointer;
    c.timeout_seconds = timeout_seconds;
    c.max_retries = max_retries;
    c.debug = debug;
    return c;
}

ClassifierConfig ClassifierSettings::classifier_config() const {
    ClassifierConfig c;
    c.endpoint = provider == "mock" ? "mock" : http().url;
    c.model = model;
    c.temperature = temperature;
    c.max_output_tokens = max_output_tokens;
    c.timeout_seconds = timeout_seconds;
    c.max_retries = max_retries;
    c.parallelism = parallelism;
    return c;
}

AgentConfig AgentSettings::agent_config() const {
    AgentConfig c;
    c.endpoint = provider == "mock" ? "mock" : http().url;
    c.model = model;
    c.temperature = temperature;
    c.max_output_tokens = max_output_tokens;
    c.timeout_seconds = timeout_seconds;
    c.max_retries = max_retries;
    c.instruction = instruction;
    return c;
}

RunConfig::RunConfig() {
    classifier.model = "mock-classifier";
    agent.model = "mock-agent";
    agent.max_output_tokens = 4096;
    agent.timeout_seconds = 300.0;
    prices["mock-classifier"] = {2.0, 8.0};
    prices["mock-agent"] = {3.0, 15.0};
}

void RunConfig::validate() const {
    stop.validate();
    validate_backend(classifier, "classifier");
    validate_backend(agent, "agent");
    if (classifier.parallelism < 1) throw ConfigError("classifier.parallelism must be >= 1");
    if (classifier.mock_rule_accuracy < 0 || classifier.mock_rule_accuracy > 1)
        throw ConfigError("classifier.mock.rule_accuracy must be within [0, 1]");
    if (max_reproposals < 0) throw ConfigError("max_reproposals must be >= 0");
    if (folds < 2) throw ConfigError("cv.folds must be >= 2");
    if (synthetic_sessions < 1) throw ConfigError("synthetic.sessions must be >= 1");
    if (synthetic_raters < 0) throw ConfigError("synthetic.raters must be >= 0");
    if (output_root.empty()) throw ConfigError("output_root is required");
    if (dataset.empty() && !mock_classifier())
        throw ConfigError("dataset is required unless classifier.provider is \"mock\"");
    if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port must be within [0, 65535]");
    try {
        check_prices(prices);
    } catch (const Error& e) {
        throw ConfigError(std::string("prices: ") + e.what());
    }
    for (const std::string* m : {&classifier.model, &agent.model})
        if (!prices.contains(*m)) throw ConfigError("prices." + *m + " is required (price for the configured model)");
}

RunConfig parse_config(const json& j) {
    RunConfig c;
    Section root(j, "");
    root.get("dataset", c.dataset);
    root.get("output_root", c.output_root);
    root.get("seed", c.seed);
    std::string review = std::string(to_string(c.review));
    root.get("review", review);
    try {
        c.review = parse_review_mode(review);
    } catch (const ConfigError&) {
        throw ConfigError("review must be \"auto\", \"cli\" or \"web\"");
    }
    root.get("baseline_prompt", c.baseline_prompt);
    root.get("max_reproposals", c.max_reproposals);

    if (auto s = root.child("classifier")) {
        read_backend(*s, c.classifier);
        s->get("parallelism", c.classifier.parallelism);
        if (auto m = s->child("mock")) {
            m->get("rule_accuracy", c.classifier.mock_rule_accuracy);
            m->get("perfect", c.classifier.mock_perfect);
            if (const json* ids = m->find("unparseable_ids")) {
                if (!ids->is_array()) throw ConfigError("classifier.mock.unparseable_ids must be an array");
                for (const json& id : *ids) {
                    if (!id.is_string()) throw ConfigError("classifier.mock.unparseable_ids must hold strings");
                    c.classifier.mock_unparseable_ids.insert(id.get<std::string>());
                }
            }
            read_usage(*m, "usage_per_call", c.classifier.mock_usage);
            m->finish();
        }
        s->finish();
    }
    if (auto s = root.child("agent")) {
        read_backend(*s, c.agent);
        s->get("instruction", c.agent.instruction);
        if (auto m = s->child("mock")) {
            read_usage(*m, "usage_per_call", c.agent.mock_usage);
            m->finish();
        }
        s->finish();
    }
    if (auto s = root.child("stop")) {
        s->get("epsilon", c.stop.epsilon);
        s->get("patience", c.stop.patience);
        s->get("max_iterations", c.stop.max_iterations);
        s->finish();
    }
    if (auto s = root.child("prices")) {
        for (const auto& [model, _] : s->raw().items()) {
            auto p = s->child(model);
            Price price;
            if (!p->find("usd_per_million_input") || !p->find("usd_per_million_output"))
                throw ConfigError("prices." + model + " needs usd_per_million_input and usd_per_million_output");
            p->get("usd_per_million_input", price.usd_per_million_input);
            p->get("usd_per_million_output", price.usd_per_million_output);
            p->finish();
            c.prices[model] = price;
        }
        s->finish();
    }
    if (auto s = root.child("serve")) {
        s->get("host", c.serve.host);
        s->get("port", c.serve.port);
        s->get("static_dir", c.serve.static_dir);
        s->finish();
    }
    if (auto s = root.child("synthetic")) {
        s->get("sessions", c.synthetic_sessions);
        s->get("raters", c.synthetic_raters);
        s->finish();
    }
    if (auto s = root.child("cv")) {
        s->get("folds", c.folds);
        s->get("parallel", c.cv_parallel);
        s->finish();
    }
    root.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json config_to_json(const RunConfig& c) {
    json classifier = backend_json(c.classifier);
    classifier["parallelism"] = c.classifier.parallelism;
    classifier["mock"] = json{{"rule_accuracy", c.classifier.mock_rule_accuracy},
                              {"perfect", c.classifier.mock_perfect},
                              {"unparseable_ids", c.classifier.mock_unparseable_ids},
                              {"usage_per_call",
                               {{"input_tokens", c.classifier.mock_usage.input_tokens},
                                {"output_tokens", c.classifier.mock_usage.output_tokens}}}};
    json agent = backend_json(c.agent);
    agent["instruction"] = c.agent.instruction;
    agent["mock"] = json{{"usage_per_call",
                          {{"input_tokens", c.agent.mock_usage.input_tokens},
                           {"output_tokens", c.agent.mock_usage.output_tokens}}}};
    json prices = json::object();
    for (const auto& [m, p] : c.prices)
        prices[m] = json{{"usd_per_million_input", p.usd_per_million_input},
                         {"usd_per_million_output", p.usd_per_million_output}};
    return json{{"dataset", c.dataset},
                {"output_root", c.output_root},
                {"seed", c.seed},
                {"review", to_string(c.review)},
                {"baseline_prompt", c.baseline_prompt},
                {"max_reproposals", c.max_reproposals},
                {"classifier", classifier},
                {"agent", agent},
                {"stop",
                 {{"epsilon", c.stop.epsilon},
                  {"patience", c.stop.patience},
                  {"max_iterations", c.stop.max_iterations}}},
                {"prices", prices},
                {"serve", {{"host", c.serve.host}, {"port", c.serve.port}, {"static_dir", c.serve.static_dir}}},
                {"synthetic", {{"sessions", c.synthetic_sessions}, {"raters", c.synthetic_raters}}},
                {"cv", {{"folds", c.folds}, {"parallel", c.cv_parallel}}}};
}

void apply_env(RunConfig& c, const EnvLookup& env) {
    auto number = [](const std::string& name, const std::string& v) -> long long {
        try {
            std::size_t used = 0;
            long long n = std::stoll(v, &used);
            if (used != v.size() || n < 0) throw std::invalid_argument(v);
            return n;
        } catch (const std::logic_error&) {
            throw ConfigError(name + " must be a non-negative integer, got '" + v + "'");
        }
    };
    if (auto v = env("LABELREFINE_DATASET")) c.dataset = *v;
    if (auto v = env("LABELREFINE_OUTPUT_ROOT")) c.output_root = *v;
    if (auto v = env("LABELREFINE_SEED")) c.seed = static_cast<std::uint64_t>(number("LABELREFINE_SEED", *v));
    if (auto v = env("LABELREFINE_REVIEW")) c.review = parse_review_mode(*v);
    if (auto v = env("LABELREFINE_MAX_ITERS"))
        c.stop.max_iterations = static_cast<int>(number("LABELREFINE_MAX_ITERS", *v));
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

void use_mocks(RunConfig& c) {
    c.classifier.provider = "mock";
    c.agent.provider = "mock";
    c.classifier.model = "mock-classifier";
    c.agent.model = "mock-agent";
    if (!c.prices.contains("mock-classifier")) c.prices["mock-classifier"] = {2.0, 8.0};
    if (!c.prices.contains("mock-agent")) c.prices["mock-agent"] = {3.0, 15.0};
}

std::unique_ptr<ChatBackend> make_classifier_backend(const ClassifierSettings& s, std::uint64_t seed) {
    if (s.provider == "mock") {
        MockClassifierOptions o;
        o.seed = seed;
        o.rule_accuracy = s.mock_rule_accuracy;
        o.perfect = s.mock_perfect;
        o.unparseable_ids = s.mock_unparseable_ids;
        o.usage_per_call = s.mock_usage;
        return std::make_unique<MockClassifierBackend>(o);
    }
    return std::make_unique<HttpChatBackend>(s.http());
}

AgentBundle make_agent(const AgentSettings& s) {
    AgentBundle b;
    if (s.provider == "mock") {
        b.agent = std::make_unique<ScriptedAgent>(default_rule_script(), s.mock_usage);
        return b;
    }
    b.backend = std::make_unique<HttpChatBackend>(s.http());
    b.agent = std::make_unique<LlmAgent>(*b.backend, s.agent_config());
    return b;
}

}  // namespace labelrefine
