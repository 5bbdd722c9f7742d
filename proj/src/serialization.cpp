#include "labelrefine/serialization.hpp"

namespace labelrefine {

namespace {

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

}  // namespace

json dimension_map_to_json(const std::map<Dimension, double>& m) {
    json j = json::object();
    for (const auto& [d, v] : m) j[std::string(to_string(d))] = v;
    return j;
}

std::map<Dimension, double> dimension_map_from_json(const json& j) {
    std::map<Dimension, double> m;
    for (const auto& [k, v] : j.items()) m[parse_dimension(k)] = v.get<double>();
    return m;
}

void to_json(json& j, const Exchange& x) { j = json{{"role", to_string(x.role)}, {"text", x.text}}; }

void to_json(json& j, const Session& s) {
    j = json{{"id", s.id}, {"topic_area", to_string(s.topic_area)}};
    if (s.semester) j["semester"] = *s.semester;
    j["exchanges"] = s.exchanges;
}

void to_json(json& j, const LabelSet& l) {
    j = json{{"intent", to_string(l.intent)}, {"topic", to_string(l.topic)}, {"followup", to_string(l.followup)}};
}

void from_json(const json& j, LabelSet& l) {
    l.intent = parse_intent(j.at("intent").get<std::string>());
    l.topic = parse_topic(j.at("topic").get<std::string>());
    l.followup = parse_followup(j.at("followup").get<std::string>());
}

void to_json(json& j, const TokenUsage& u) {
    j = json{{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}};
}

void from_json(const json& j, TokenUsage& u) {
    u.input_tokens = j.at("input_tokens").get<std::int64_t>();
    u.output_tokens = j.at("output_tokens").get<std::int64_t>();
}

void to_json(json& j, const Prediction& p) {
    j = json{{"session_id", p.session_id}, {"raw_output", p.raw_output}, {"usage", p.usage}};
    if (const auto* l = std::get_if<LabelSet>(&p.labels)) j["labels"] = *l;
    else j["parse_error"] = std::get<ParseFailure>(p.labels).reason;
}

void from_json(const json& j, Prediction& p) {
    p.session_id = j.at("session_id").get<std::string>();
    p.raw_output = j.at("raw_output").get<std::string>();
    p.usage = j.at("usage").get<TokenUsage>();
    if (j.contains("labels")) p.labels = j.at("labels").get<LabelSet>();
    else p.labels = ParseFailure{j.at("parse_error").get<std::string>()};
}

void to_json(json& j, const PromptVersion& v) {
    j = json{{"version", v.version},       {"parent", opt(v.parent)},         {"body", v.body},
             {"changelog", v.changelog},   {"reasoning", v.reasoning},        {"created_at", v.created_at},
             {"author", to_string(v.author)}};
}

void from_json(const json& j, PromptVersion& v) {
    v.version = j.at("version").get<int>();
    v.parent = opt_from<int>(j, "parent");
    v.body = j.at("body").get<std::string>();
    v.changelog = j.value("changelog", "");
    v.reasoning = j.value("reasoning", "");
    v.created_at = j.value("created_at", "");
    v.author = parse_author(j.at("author").get<std::string>());
}

void to_json(json& j, const Disagreement& d) {
    j = json{{"session_id", d.session_id},
             {"dimension", to_string(d.dimension)},
             {"predicted", d.predicted},
             {"gold", d.gold}};
}

void from_json(const json& j, Disagreement& d) {
    d.session_id = j.at("session_id").get<std::string>();
    d.dimension = parse_dimension(j.at("dimension").get<std::string>());
    d.predicted = j.at("predicted").get<std::string>();
    d.gold = j.at("gold").get<std::string>();
}

void to_json(json& j, const EvalResult& e) {
    j = json{{"prompt_version", e.prompt_version},
             {"per_dimension_kappa", dimension_map_to_json(e.per_dimension_kappa)},
             {"overall_kappa", e.overall_kappa},
             {"per_dimension_f1", dimension_map_to_json(e.per_dimension_f1)},
             {"overall_f1", e.overall_f1},
             {"parse_rate", e.parse_rate},
             {"parsed", e.parsed},
             {"total", e.total},
             {"disagreements", e.disagreements},
             {"unparsed", e.unparsed},
             {"usage", e.usage},
             {"cost", e.cost}};
}

void from_json(const json& j, EvalResult& e) {
    e.prompt_version = j.at("prompt_version").get<int>();
    e.per_dimension_kappa = dimension_map_from_json(j.at("per_dimension_kappa"));
    e.overall_kappa = j.at("overall_kappa").get<double>();
    e.per_dimension_f1 = dimension_map_from_json(j.at("per_dimension_f1"));
    e.overall_f1 = j.at("overall_f1").get<double>();
    e.parse_rate = j.at("parse_rate").get<double>();
    e.parsed = j.at("parsed").get<std::int64_t>();
    e.total = j.at("total").get<std::int64_t>();
    e.disagreements = j.at("disagreements").get<std::vector<Disagreement>>();
    e.unparsed = j.at("unparsed").get<std::vector<Prediction>>();
    e.usage = j.at("usage").get<TokenUsage>();
    e.cost = j.at("cost").get<double>();
}

void to_json(json& j, const DisagreementGroup& g) {
    j = json{{"predicted", g.predicted},
             {"gold", g.gold},
             {"count", g.count},
             {"session_ids", g.session_ids},
             {"excerpts", g.excerpts}};
}

void from_json(const json& j, DisagreementGroup& g) {
    g.predicted = j.at("predicted").get<std::string>();
    g.gold = j.at("gold").get<std::string>();
    g.count = j.at("count").get<int>();
    g.session_ids = j.at("session_ids").get<std::vector<std::string>>();
    g.excerpts = j.at("excerpts").get<std::vector<std::string>>();
}

void to_json(json& j, const DisagreementReport& r) {
    json groups = json::object();
    for (const auto& [d, list] : r.groups) groups[std::string(to_string(d))] = list;
    j = json{{"groups", groups},
             {"kappas", dimension_map_to_json(r.kappas)},
             {"lowest_kappa_dimension", to_string(r.lowest_kappa_dimension)},
             {"total", r.total()}};
}

void from_json(const json& j, DisagreementReport& r) {
    r.groups.clear();
    for (const auto& [k, v] : j.at("groups").items())
        r.groups[parse_dimension(k)] = v.get<std::vector<DisagreementGroup>>();
    r.kappas = dimension_map_from_json(j.at("kappas"));
    r.lowest_kappa_dimension = parse_dimension(j.at("lowest_kappa_dimension").get<std::string>());
}

void to_json(json& j, const ProposedRevision& p) {
    j = json{{"base_version", p.base_version},
             {"new_body", p.new_body},
             {"changelog", p.changelog},
             {"reasoning", p.reasoning},
             {"usage", p.usage}};
}

void from_json(const json& j, ProposedRevision& p) {
    p.base_version = j.at("base_version").get<int>();
    p.new_body = j.at("new_body").get<std::string>();
    p.changelog = j.at("changelog").get<std::string>();
    p.reasoning = j.at("reasoning").get<std::string>();
    p.usage = j.at("usage").get<TokenUsage>();
}

void to_json(json& j, const VetoedAttempt& v) {
    j = json{{"proposal", v.proposal}, {"note", v.note}, {"actor", v.actor}};
}

void from_json(const json& j, VetoedAttempt& v) {
    v.proposal = j.at("proposal").get<ProposedRevision>();
    v.note = j.at("note").get<std::string>();
    v.actor = j.at("actor").get<std::string>();
}

void to_json(json& j, const IterationRecord& r) {
    j = json{{"iteration", r.iteration},
             {"prompt_version", r.prompt_version},
             {"eval", r.eval},
             {"eval_reused", r.eval_reused},
             {"report", opt(r.report)},
             {"proposal", opt(r.proposal)},
             {"decision", r.decision ? json(to_string(*r.decision)) : json(nullptr)},
             {"decision_note", r.decision_note},
             {"actor", r.actor},
             {"vetoed_attempts", r.vetoed_attempts},
             {"applied_version", opt(r.applied_version)},
             {"stop_reason", r.stop_reason ? json(to_string(*r.stop_reason)) : json(nullptr)},
             {"started_at", r.started_at},
             {"finished_at", r.finished_at},
             {"classifier_usage_total", r.classifier_usage_total},
             {"agent_usage_total", r.agent_usage_total},
             {"cumulative_cost", r.cumulative_cost}};
}

void from_json(const json& j, IterationRecord& r) {
    r.iteration = j.at("iteration").get<int>();
    r.prompt_version = j.at("prompt_version").get<int>();
    r.eval = j.at("eval").get<EvalResult>();
    r.eval_reused = j.at("eval_reused").get<bool>();
    r.report = opt_from<DisagreementReport>(j, "report");
    r.proposal = opt_from<ProposedRevision>(j, "proposal");
    if (auto d = opt_from<std::string>(j, "decision")) r.decision = parse_decision(*d);
    else r.decision.reset();
    r.decision_note = j.at("decision_note").get<std::string>();
    r.actor = j.at("actor").get<std::string>();
    r.vetoed_attempts = j.at("vetoed_attempts").get<std::vector<VetoedAttempt>>();
    r.applied_version = opt_from<int>(j, "applied_version");
    if (auto s = opt_from<std::string>(j, "stop_reason")) r.stop_reason = parse_stop_reason(*s);
    else r.stop_reason.reset();
    r.started_at = j.at("started_at").get<std::string>();
    r.finished_at = j.at("finished_at").get<std::string>();
    r.classifier_usage_total = j.at("classifier_usage_total").get<TokenUsage>();
    r.agent_usage_total = j.at("agent_usage_total").get<TokenUsage>();
    r.cumulative_cost = j.at("cumulative_cost").get<double>();
}

void to_json(json& j, const RunRecord& r) {
    j = json{{"run_id", r.run_id},
             {"config", r.config},
             {"dataset_fingerprint", r.dataset_fingerprint},
             {"versions", r.versions},
             {"iterations", r.iterations},
             {"best_version", opt(r.best_version)},
             {"stop_reason", r.stop_reason ? json(to_string(*r.stop_reason)) : json(nullptr)},
             {"error", r.error}};
}

void from_json(const json& j, RunRecord& r) {
    r.run_id = j.at("run_id").get<std::string>();
    r.config = j.value("config", json::object());
    r.dataset_fingerprint = j.value("dataset_fingerprint", "");
    r.versions = j.at("versions").get<std::vector<PromptVersion>>();
    r.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
    r.best_version = opt_from<int>(j, "best_version");
    if (auto s = opt_from<std::string>(j, "stop_reason")) r.stop_reason = parse_stop_reason(*s);
    else r.stop_reason.reset();
    r.error = j.value("error", "");
}

void to_json(json& j, const StopPolicy& p) {
    j = json{{"epsilon", p.epsilon}, {"patience", p.patience}, {"max_iterations", p.max_iterations}};
}

void from_json(const json& j, StopPolicy& p) {
    p.epsilon = j.at("epsilon").get<double>();
    p.patience = j.at("patience").get<int>();
    p.max_iterations = j.at("max_iterations").get<int>();
}

void to_json(json& j, const Price& p) {
    j = json{{"usd_per_million_input", p.usd_per_million_input},
             {"usd_per_million_output", p.usd_per_million_output}};
}

void from_json(const json& j, Price& p) {
    p.usd_per_million_input = j.at("usd_per_million_input").get<double>();
    p.usd_per_million_output = j.at("usd_per_million_output").get<double>();
}

void to_json(json& j, const RegressionEvent& e) {
    j = json{{"metric", e.metric},         {"from_version", e.from_version}, {"to_version", e.to_version},
             {"from_value", e.from_value}, {"to_value", e.to_value},         {"delta", e.delta}};
}

}  // namespace labelrefine
