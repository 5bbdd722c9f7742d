#include "labelrefine/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <memory>
#include <set>
#include <sstream>

#include "labelrefine/errors.hpp"

namespace labelrefine {

namespace {

constexpr std::array<std::string_view, 2> kRoles{"student", "tutor"};
constexpr std::array<std::string_view, 5> kTopicAreas{"logic", "proof", "set_theory",
                                                      "combinatorics", "other"};
constexpr std::array<std::string_view, 3> kIntent{"AS", "HL", "OT"};
constexpr std::array<std::string_view, 2> kTopic{"C", "P"};
constexpr std::array<std::string_view, 3> kFollowup{"E", "EA", "S"};
constexpr std::array<std::string_view, 3> kDimensionNames{"intent", "topic", "followup"};
constexpr std::array<std::string_view, 3> kAuthors{"human", "agent", "merge"};

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& table, std::string_view s,
                   std::string_view what) {
    for (std::size_t i = 0; i < N; ++i)
        if (table[i] == s) return i;
    throw SchemaError("invalid " + std::string(what) + " '" + std::string(s) + "'");
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(Role r) { return kRoles[static_cast<int>(r)]; }
std::string_view to_string(TopicArea t) { return kTopicAreas[static_cast<int>(t)]; }
std::string_view to_string(Intent v) { return kIntent[static_cast<int>(v)]; }
std::string_view to_string(Topic v) { return kTopic[static_cast<int>(v)]; }
std::string_view to_string(Followup v) { return kFollowup[static_cast<int>(v)]; }
std::string_view to_string(Dimension d) { return kDimensionNames[static_cast<int>(d)]; }
std::string_view to_string(Author a) { return kAuthors[static_cast<int>(a)]; }

Role parse_role(std::string_view s) { return static_cast<Role>(lookup(kRoles, s, "role")); }
TopicArea parse_topic_area(std::string_view s) {
    return static_cast<TopicArea>(lookup(kTopicAreas, s, "topic_area"));
}
Intent parse_intent(std::string_view s) { return static_cast<Intent>(lookup(kIntent, s, "intent")); }
Topic parse_topic(std::string_view s) { return static_cast<Topic>(lookup(kTopic, s, "topic")); }
Followup parse_followup(std::string_view s) {
    return static_cast<Followup>(lookup(kFollowup, s, "followup"));
}
Dimension parse_dimension(std::string_view s) {
    return static_cast<Dimension>(lookup(kDimensionNames, s, "dimension"));
}
Author parse_author(std::string_view s) { return static_cast<Author>(lookup(kAuthors, s, "author")); }

std::span<const std::string_view> categories(Dimension d) {
    switch (d) {
        case Dimension::intent: return kIntent;
        case Dimension::topic: return kTopic;
        case Dimension::followup: return kFollowup;
    }
    return {};
}

std::string_view long_name(Dimension d, std::string_view code) {
    static const std::map<std::pair<Dimension, std::string_view>, std::string_view> names{
        {{Dimension::intent, "AS"}, "Answer-Seeking"}, {{Dimension::intent, "HL"}, "Help-Seeking"},
        {{Dimension::intent, "OT"}, "Other"},          {{Dimension::topic, "C"}, "Conceptual"},
        {{Dimension::topic, "P"}, "Procedural"},       {{Dimension::followup, "E"}, "Engage"},
        {{Dimension::followup, "EA"}, "Escalate"},     {{Dimension::followup, "S"}, "Switch"},
    };
    auto it = names.find({d, code});
    return it == names.end() ? code : it->second;
}

int LabelSet::index(Dimension d) const {
    switch (d) {
        case Dimension::intent: return static_cast<int>(intent);
        case Dimension::topic: return static_cast<int>(topic);
        case Dimension::followup: return static_cast<int>(followup);
    }
    return -1;
}

std::string_view LabelSet::code(Dimension d) const { return categories(d)[index(d)]; }

LabelSet label_from_indices(int intent, int topic, int followup) {
    if (intent < 0 || intent >= 3 || topic < 0 || topic >= 2 || followup < 0 || followup >= 3)
        throw InvalidArgument("category index out of range");
    return {static_cast<Intent>(intent), static_cast<Topic>(topic), static_cast<Followup>(followup)};
}

const Codebook& default_codebook() {
    static const Codebook cb{
        {Dimension::intent,
         {{"AS", "The student mainly wants the final answer or a worked solution and shows little "
                 "interest in understanding it; includes direct answer requests and indirect "
                 "attempts to extract the solution."},
          {"HL", "The student is trying to understand: follows hints, asks clarifying questions, "
                 "and is willing to work through the problem."},
          {"OT", "Off-topic talk, technical or logistics questions, or interactions whose goal "
                 "cannot be determined."}}},
        {Dimension::topic,
         {{"C", "The question concerns a definition, theorem, or concept."},
          {"P", "The question concerns how to solve a problem or apply a technique."}}},
        {Dimension::followup,
         {{"E", "After receiving guidance the student keeps working, asks a follow-up question, "
                "or says they are confused."},
          {"EA", "The student explicitly asks for more direct help, such as being told the "
                 "answer."},
          {"S", "The student drops the current problem and moves to an unrelated topic."}}},
    };
    return cb;
}

void check_codebook(const Codebook& cb) {
    for (Dimension d : kDimensions) {
        auto it = cb.find(d);
        for (std::string_view code : categories(d)) {
            if (it == cb.end()) throw ValidationError("codebook lacks dimension " + std::string(to_string(d)));
            auto def = it->second.find(std::string(code));
            if (def == it->second.end() || blank(def->second))
                throw ValidationError("codebook lacks a definition for " + std::string(to_string(d)) +
                                      "/" + std::string(code));
        }
    }
}

std::string baseline_prompt_body(const Codebook& cb) {
    check_codebook(cb);
    std::ostringstream out;
    out << "You label tutoring dialogues between a student and a math tutoring chatbot.\n"
        << "Assign exactly one category per dimension to the whole session.\n";
    const std::array<std::string_view, 3> headings{"Student Intent", "Topic Type", "Follow-up Type"};
    for (Dimension d : kDimensions) {
        out << "\n## " << headings[static_cast<int>(d)] << " (" << to_string(d) << ")\n";
        for (std::string_view code : categories(d))
            out << "- " << code << " (" << long_name(d, code) << "): " << cb.at(d).at(std::string(code))
                << "\n";
    }
    return out.str();
}

std::string_view to_string(DatasetIssue::Kind k) {
    switch (k) {
        case DatasetIssue::Kind::missing_gold: return "missing_gold";
        case DatasetIssue::Kind::duplicate_id: return "duplicate_id";
        case DatasetIssue::Kind::empty_session: return "empty_session";
        case DatasetIssue::Kind::empty_text: return "empty_text";
        case DatasetIssue::Kind::bad_index: return "bad_index";
        case DatasetIssue::Kind::orphan_gold: return "orphan_gold";
    }
    return "unknown";
}

std::size_t ValidationReport::count(DatasetIssue::Kind k) const {
    return static_cast<std::size_t>(
        std::count_if(issues.begin(), issues.end(), [k](const DatasetIssue& i) { return i.kind == k; }));
}

ValidationReport validate_dataset(std::span<const Session> sessions, const GoldLabels& gold) {
    using Kind = DatasetIssue::Kind;
    ValidationReport report;
    std::set<std::string> seen;
    for (const Session& s : sessions) {
        if (!seen.insert(s.id).second) {
            report.issues.push_back({Kind::duplicate_id, s.id, "session id appears more than once"});
            continue;
        }
        if (s.exchanges.empty()) report.issues.push_back({Kind::empty_session, s.id, "no exchanges"});
        for (std::size_t i = 0; i < s.exchanges.size(); ++i) {
            const Exchange& e = s.exchanges[i];
            if (blank(e.text))
                report.issues.push_back({Kind::empty_text, s.id, "exchange " + std::to_string(i) + " is blank"});
            if (e.index != static_cast<int>(i))
                report.issues.push_back({Kind::bad_index, s.id,
                                         "exchange index " + std::to_string(e.index) + " at position " +
                                             std::to_string(i)});
        }
        if (!gold.contains(s.id)) report.issues.push_back({Kind::missing_gold, s.id, "no gold label"});
    }
    for (const auto& [id, _] : gold)
        if (!seen.contains(id)) report.issues.push_back({Kind::orphan_gold, id, "gold label without session"});
    return report;
}

void check_lineage(std::span<const PromptVersion> versions) {
    std::map<int, const PromptVersion*> by_version;
    for (const PromptVersion& v : versions) {
        if (v.body.empty()) throw ValidationError("prompt v" + std::to_string(v.version) + " has an empty body");
        if (!by_version.emplace(v.version, &v).second)
            throw ValidationError("duplicate prompt version " + std::to_string(v.version));
    }
    for (const PromptVersion& v : versions) {
        if (v.version == 0) {
            if (v.parent) throw ValidationError("prompt v0 must not have a parent");
            continue;
        }
        if (!v.parent) throw ValidationError("prompt v" + std::to_string(v.version) + " has no parent");
        if (*v.parent >= v.version || !by_version.contains(*v.parent))
            throw ValidationError("prompt v" + std::to_string(v.version) + " has invalid parent v" +
                                  std::to_string(*v.parent));
    }
}

std::string format_utc(std::int64_t epoch_seconds) {
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Clock system_clock() {
    return [] {
        auto now = std::chrono::system_clock::now();
        return format_utc(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
    };
}

Clock logical_clock(std::int64_t start_epoch_seconds) {
    auto tick = std::make_shared<std::atomic<std::int64_t>>(start_epoch_seconds);
    return [tick] { return format_utc(tick->fetch_add(1)); };
}

}  // namespace labelrefine
