#include "labelrefine/mock.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "labelrefine/metrics.hpp"
#include "labelrefine/random.hpp"
#include "labelrefine/synthetic.hpp"

namespace labelrefine {

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Student lines only, lowercased.
std::string student_text(const std::string& transcript) {
    std::istringstream in(transcript);
    std::string line, out;
    while (std::getline(in, line))
        if (line.starts_with("Student: ")) out += lowercase(line.substr(9)) + '\n';
    return out;
}

const MarkerClass* find_marker(const std::string& student, Dimension d) {
    for (const MarkerClass& m : marker_catalog()) {
        if (m.dimension != d) continue;
        for (const std::string& phrase : m.phrases)
            if (student.find(lowercase(phrase)) != std::string::npos) return &m;
    }
    return nullptr;
}

}  // namespace

std::string transcript_session_id(const std::string& transcript) {
    if (!transcript.starts_with("Session: ")) return {};
    auto end = transcript.find('\n');
    return transcript.substr(9, end == std::string::npos ? std::string::npos : end - 9);
}

std::string rule_marker(const std::string& token) { return "[RULE " + token + "]"; }

ChatResponse MockClassifierBackend::complete(const ChatRequest& request) {
    std::string system, user;
    for (const ChatMessage& m : request.messages) (m.role == "system" ? system : user) += m.content;
    const std::string id = transcript_session_id(user);
    ChatResponse out;
    out.usage = opts_.usage_per_call;
    if (opts_.unparseable_ids.contains(id)) {
        out.text = "The student is answer-seeking.";
        return out;
    }
    const std::string student = student_text(user);
    std::array<int, 3> labels{0, 0, 0};
    for (Dimension d : kDimensions) {
        const MarkerClass* m = find_marker(student, d);
        if (!m) continue;
        double accuracy = m->base_accuracy;
        if (!m->rule_token.empty() && system.find(rule_marker(m->rule_token)) != std::string::npos)
            accuracy = opts_.rule_accuracy;
        if (opts_.perfect) accuracy = 1.0;
        const double u = hash_unit(opts_.seed, id + "/" + std::string(to_string(d)));
        labels[static_cast<int>(d)] = u < accuracy ? m->gold_category : m->confusable_category;
    }
    const LabelSet l = label_from_indices(labels[0], labels[1], labels[2]);
    nlohmann::ordered_json obj{{"intent", to_string(l.intent)}, {"topic", to_string(l.topic)},
                               {"followup", to_string(l.followup)}};
    out.text = obj.dump();
    return out;
}

const std::vector<ScriptedRule>& default_rule_script() {
    static const std::vector<ScriptedRule> script{
        {"CONFUSION_IS_ENGAGE", "confusion without a demand counts as Engage", Dimension::followup,
         "A student who reports being stuck or not knowing where to start, without asking to be given the "
         "answer, is still engaged: label the follow-up Engage (E), not Escalate (EA)."},
        {"PROVE_IS_HELP", "proof requests are Help-Seeking", Dimension::intent,
         "A request to prove or show a statement is Help-Seeking (HL) unless the student also demands the "
         "finished answer."},
        {"WHY_IS_CONCEPTUAL", "how-and-why questions are Conceptual", Dimension::topic,
         "When a question asks both how to carry out steps and why they are valid, label the topic "
         "Conceptual (C)."},
        {"FORMAT_REMINDER", "restate the output contract", std::nullopt,
         "Return only the JSON object with the three codes; add no commentary."},
        {"SINGLE_LABEL", "one category per dimension", std::nullopt,
         "Choose exactly one category per dimension even when several seem plausible."},
    };
    return script;
}

ProposedRevision ScriptedAgent::propose(const AgentContext& ctx) {
    auto vetoed = [&](const ScriptedRule& r) {
        return std::any_of(ctx.veto_notes.begin(), ctx.veto_notes.end(),
                           [&](const std::string& note) {
                               return note.find(r.token) != std::string::npos || note.find(r.name) != std::string::npos;
                           });
    };
    std::vector<const ScriptedRule*> candidates;
    for (const ScriptedRule& r : script_)
        if (ctx.current.body.find(rule_marker(r.token)) == std::string::npos && !vetoed(r)) candidates.push_back(&r);
    if (candidates.empty()) throw NoUsableRevision("rule script exhausted");

    const Dimension low = ctx.report.lowest_kappa_dimension;
    auto pick = std::find_if(candidates.begin(), candidates.end(),
                             [&](const ScriptedRule* r) { return r->target == low; });
    const ScriptedRule& rule = **(pick != candidates.end() ? pick : candidates.begin());

    ProposedRevision r;
    r.base_version = ctx.current.version;
    r.new_body = ctx.current.body;
    if (!r.new_body.ends_with('\n')) r.new_body += '\n';
    if (r.new_body.find("## Refinement rules") == std::string::npos) r.new_body += "\n## Refinement rules\n";
    r.new_body += "- " + rule_marker(rule.token) + " " + rule.text + "\n";
    r.changelog = rule.name;

    std::ostringstream why;
    why << "Lowest-kappa dimension: " << to_string(low);
    if (auto k = ctx.report.kappas.find(low); k != ctx.report.kappas.end()) why << " (kappa " << format_fixed(k->second, 3) << ")";
    if (auto g = ctx.report.groups.find(low); g != ctx.report.groups.end() && !g->second.empty())
        why << "; largest disagreement group predicted " << g->second.front().predicted << " vs gold "
            << g->second.front().gold << " (" << g->second.front().count << " sessions)";
    why << ". Adding rule " << rule.token << ".";
    r.reasoning = why.str();
    r.usage = usage_;
    return r;
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    std::string user;
    for (const ChatMessage& m : request.messages)
        if (m.role == "user") user += m.content;
    {
        std::lock_guard lock(mutex_);
        entries_.push_back({phase_, transcript_session_id(user)});
    }
    return inner_.complete(request);
}

void RecordingBackend::set_phase(std::string phase) {
    std::lock_guard lock(mutex_);
    phase_ = std::move(phase);
}

std::vector<RecordingBackend::Entry> RecordingBackend::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

}  // namespace labelrefine
