#include "labelrefine/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "labelrefine/errors.hpp"
#include "labelrefine/random.hpp"
#include "labelrefine/serialization.hpp"

namespace labelrefine {

using json = nlohmann::json;

std::vector<std::int64_t> apportion(std::int64_t total, const std::vector<double>& weights) {
    if (weights.empty()) throw InvalidArgument("apportion needs at least one weight");
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0.0)) throw InvalidArgument("apportion weights must have a positive sum");
    std::vector<std::int64_t> parts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0) throw InvalidArgument("apportion weights must be non-negative");
        const double exact = static_cast<double>(total) * weights[i] / sum;
        // guard against 11.999999 style representation error
        parts[i] = static_cast<std::int64_t>(std::floor(exact + 1e-9));
        assigned += parts[i];
        remainders.emplace_back(exact - static_cast<double>(parts[i]), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++parts[remainders[r % remainders.size()].second];
    return parts;
}

const Session& LabeledDataset::session(const std::string& id) const {
    auto it = std::find_if(sessions.begin(), sessions.end(), [&](const Session& s) { return s.id == id; });
    if (it == sessions.end()) throw NotFound("unknown session '" + id + "'");
    return *it;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::string>& ids) const {
    std::set<std::string> keep(ids.begin(), ids.end());
    LabeledDataset out;
    for (const Session& s : sessions) {
        if (!keep.contains(s.id)) continue;
        out.sessions.push_back(s);
        if (auto it = gold.find(s.id); it != gold.end()) out.gold.emplace(s.id, it->second);
        for (const auto& [rater, labels] : raters)
            if (auto it = labels.find(s.id); it != labels.end()) out.raters[rater].emplace(s.id, it->second);
    }
    return out;
}

std::vector<std::string> LabeledDataset::ids() const {
    std::vector<std::string> out;
    for (const Session& s : sessions) out.push_back(s.id);
    return out;
}

namespace {

const json& require(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string("missing field '") + key + "'", line);
    return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
    const json& v = require(obj, key, line);
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string", line);
    return v.get<std::string>();
}

LabelSet parse_label_object(const json& obj, std::size_t line) {
    if (!obj.is_object()) throw SchemaError("labels must be an object", line);
    for (const auto& [k, _] : obj.items())
        if (k != "intent" && k != "topic" && k != "followup") throw SchemaError("unknown label key '" + k + "'", line);
    try {
        return LabelSet{parse_intent(require_string(obj, "intent", line)),
                        parse_topic(require_string(obj, "topic", line)),
                        parse_followup(require_string(obj, "followup", line))};
    } catch (const SchemaError& e) {
        if (e.line()) throw;
        throw SchemaError(e.what(), line);
    }
}

}  // namespace

LabeledDataset parse_dataset(std::istream& in) {
    LabeledDataset d;
    std::string text;
    std::size_t line_no = 0;
    static const std::set<std::string> allowed{"id", "topic_area", "semester", "exchanges", "gold", "raters"};
    while (std::getline(in, text)) {
        ++line_no;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.find_first_not_of(" \t") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw SchemaError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object()) throw SchemaError("each line must be a JSON object", line_no);
        for (const auto& [k, _] : obj.items())
            if (!allowed.contains(k)) throw SchemaError("unknown field '" + k + "'", line_no);

        Session s;
        s.id = require_string(obj, "id", line_no);
        if (s.id.empty()) throw SchemaError("empty session id", line_no);
        try {
            s.topic_area = parse_topic_area(require_string(obj, "topic_area", line_no));
        } catch (const SchemaError& e) {
            if (e.line()) throw;
            throw SchemaError(e.what(), line_no);
        }
        if (auto it = obj.find("semester"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError("field 'semester' must be a string", line_no);
            s.semester = it->get<std::string>();
        }
        const json& ex = require(obj, "exchanges", line_no);
        if (!ex.is_array()) throw SchemaError("field 'exchanges' must be an array", line_no);
        for (const json& e : ex) {
            if (!e.is_object()) throw SchemaError("exchange must be an object", line_no);
            Exchange x;
            try {
                x.role = parse_role(require_string(e, "role", line_no));
            } catch (const SchemaError& err) {
                if (err.line()) throw;
                throw SchemaError(err.what(), line_no);
            }
            x.text = require_string(e, "text", line_no);
            x.index = static_cast<int>(s.exchanges.size());
            s.exchanges.push_back(std::move(x));
        }
        d.gold.emplace(s.id, parse_label_object(require(obj, "gold", line_no), line_no));
        if (auto it = obj.find("raters"); it != obj.end()) {
            if (!it->is_object()) throw SchemaError("field 'raters' must be an object", line_no);
            for (const auto& [rater, labels] : it->items())
                d.raters[rater].emplace(s.id, parse_label_object(labels, line_no));
        }
        d.sessions.push_back(std::move(s));
    }
    if (d.sessions.empty()) throw ValidationError("empty dataset");
    ValidationReport report = validate_dataset(d.sessions, d.gold);
    if (!report.valid()) {
        std::ostringstream msg;
        msg << "dataset failed validation:";
        for (const DatasetIssue& i : report.issues)
            msg << "\n  " << to_string(i.kind) << " " << i.session_id << ": " << i.detail;
        throw ValidationError(msg.str());
    }
    return d;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    return parse_dataset(in);
}

void write_dataset(const LabeledDataset& d, std::ostream& out) {
    for (const Session& s : d.sessions) {
        json obj = s;
        obj["gold"] = d.gold.at(s.id);
        json raters = json::object();
        for (const auto& [rater, labels] : d.raters)
            if (auto it = labels.find(s.id); it != labels.end()) raters[rater] = it->second;
        if (!raters.empty()) obj["raters"] = raters;
        out << obj.dump() << '\n';
    }
}

void save_dataset(const LabeledDataset& d, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
    write_dataset(d, out);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string_view to_string(LengthClass c) {
    switch (c) {
        case LengthClass::short_: return "short";
        case LengthClass::medium: return "medium";
        case LengthClass::long_: return "long";
    }
    return "unknown";
}

LengthClass length_class(const Session& s) {
    const std::size_t n = s.exchanges.size();
    if (n <= 4) return LengthClass::short_;
    if (n <= 10) return LengthClass::medium;
    return LengthClass::long_;
}

StratumKey parse_stratum_key(std::string_view s) {
    if (s == "length_class") return StratumKey::length_class;
    if (s == "topic_area") return StratumKey::topic_area;
    if (s == "intent") return StratumKey::intent;
    throw SchemaError("unknown stratum key '" + std::string(s) + "'");
}

namespace {

std::string stratum_of(const LabeledDataset& d, const Session& s, const std::vector<StratumKey>& keys) {
    std::string key;
    for (StratumKey k : keys) {
        if (!key.empty()) key += '|';
        switch (k) {
            case StratumKey::length_class: key += to_string(length_class(s)); break;
            case StratumKey::topic_area: key += to_string(s.topic_area); break;
            case StratumKey::intent: key += to_string(d.gold.at(s.id).intent); break;
        }
    }
    return key;
}

/// Stratum -> member ids in dataset order. Empty cross-cells never appear.
std::map<std::string, std::vector<std::string>> group_by(const LabeledDataset& d, const std::vector<StratumKey>& keys) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const Session& s : d.sessions) groups[stratum_of(d, s, keys)].push_back(s.id);
    return groups;
}

}  // namespace

LabeledDataset stratified_sample(const LabeledDataset& d, std::size_t n, const std::vector<StratumKey>& strata,
                                 std::uint64_t seed) {
    if (n > d.size())
        throw InvalidArgument("sample size " + std::to_string(n) + " exceeds dataset size " + std::to_string(d.size()));
    if (n == d.size()) return d;
    auto groups = group_by(d, strata);
    std::vector<double> weights;
    for (const auto& [_, members] : groups) weights.push_back(static_cast<double>(members.size()));
    std::vector<std::int64_t> quotas = apportion(static_cast<std::int64_t>(n), weights);

    Rng rng(seed);
    std::vector<std::string> chosen;
    std::size_t g = 0;
    for (auto& [key, members] : groups) {
        const auto quota = static_cast<std::size_t>(quotas[g++]);
        if (quota > members.size())
            throw InvalidArgument("stratum '" + key + "' cannot fill its quota of " + std::to_string(quota));
        rng.shuffle(members);
        chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    return d.subset(chosen);
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)));
    for (const auto& [_, f] : assignment) ++sizes.at(static_cast<std::size_t>(f));
    return sizes;
}

std::vector<std::string> FoldAssignment::fold_members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : assignment)
        if (f == fold) out.push_back(id);
    return out;
}

FoldAssignment stratified_kfold(const LabeledDataset& d, int k, std::uint64_t seed,
                                const std::vector<StratumKey>& strata) {
    if (k < 2) throw InvalidArgument("k must be at least 2");
    if (static_cast<std::size_t>(k) > d.size())
        throw InvalidArgument("k = " + std::to_string(k) + " exceeds dataset size " + std::to_string(d.size()));
    FoldAssignment f;
    f.k = k;
    Rng rng(seed);
    std::size_t dealt = 0;
    for (auto& [_, members] : group_by(d, strata)) {
        rng.shuffle(members);
        for (const std::string& id : members) f.assignment[id] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    }
    return f;
}

Split train_test_split(const LabeledDataset& d, const FoldAssignment& f, int test_fold) {
    if (test_fold < 0 || test_fold >= f.k)
        throw InvalidArgument("fold index " + std::to_string(test_fold) + " outside [0, " + std::to_string(f.k) + ")");
    std::vector<std::string> train, test;
    for (const Session& s : d.sessions) {
        auto it = f.assignment.find(s.id);
        if (it == f.assignment.end()) throw InvalidArgument("session '" + s.id + "' has no fold");
        (it->second == test_fold ? test : train).push_back(s.id);
    }
    return {d.subset(train), d.subset(test)};
}

}  // namespace labelrefine
