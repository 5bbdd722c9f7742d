#pragma once

// JSON encodings for persisted and served types. Keys are snake_case;
// dimension-keyed maps use the dimension names as object keys.

#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "labelrefine/engine.hpp"

namespace labelrefine {

using json = nlohmann::json;

json dimension_map_to_json(const std::map<Dimension, double>& m);
std::map<Dimension, double> dimension_map_from_json(const json& j);

void to_json(json& j, const Exchange& x);
void to_json(json& j, const Session& s);

void to_json(json& j, const LabelSet& l);
void from_json(const json& j, LabelSet& l);

void to_json(json& j, const TokenUsage& u);
void from_json(const json& j, TokenUsage& u);

void to_json(json& j, const Prediction& p);
void from_json(const json& j, Prediction& p);

void to_json(json& j, const PromptVersion& v);
void from_json(const json& j, PromptVersion& v);

void to_json(json& j, const Disagreement& d);
void from_json(const json& j, Disagreement& d);

void to_json(json& j, const EvalResult& e);
void from_json(const json& j, EvalResult& e);

void to_json(json& j, const DisagreementGroup& g);
void from_json(const json& j, DisagreementGroup& g);

void to_json(json& j, const DisagreementReport& r);
void from_json(const json& j, DisagreementReport& r);

void to_json(json& j, const ProposedRevision& p);
void from_json(const json& j, ProposedRevision& p);

void to_json(json& j, const VetoedAttempt& v);
void from_json(const json& j, VetoedAttempt& v);

void to_json(json& j, const IterationRecord& r);
void from_json(const json& j, IterationRecord& r);

void to_json(json& j, const RunRecord& r);
void from_json(const json& j, RunRecord& r);

void to_json(json& j, const StopPolicy& p);
void from_json(const json& j, StopPolicy& p);

void to_json(json& j, const Price& p);
void from_json(const json& j, Price& p);

void to_json(json& j, const RegressionEvent& e);

}  // namespace labelrefine
