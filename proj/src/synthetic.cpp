#include "labelrefine/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "labelrefine/errors.hpp"
#include "labelrefine/random.hpp"

namespace labelrefine {

namespace {

const std::vector<MarkerClass> kCatalog{
    // intent: AS=0 HL=1 OT=2
    {"intent.prove_request", Dimension::intent, 1, 0, 0.45, "PROVE_IS_HELP",
     {"prove that", "show that"}},
    {"intent.direct_answer", Dimension::intent, 0, 1, 0.92, "",
     {"can you just give me the answer", "what is the final answer", "solve it for me"}},
    {"intent.hint_request", Dimension::intent, 1, 0, 0.90, "",
     {"could you give me a hint", "help me understand how to start", "I want to understand why"}},
    {"intent.offtopic", Dimension::intent, 2, 1, 0.88, "",
     {"when is the homework due", "the website will not load", "is the exam open book"}},
    // topic: C=0 P=1
    {"topic.why_mixed", Dimension::topic, 0, 1, 0.50, "WHY_IS_CONCEPTUAL",
     {"how do I do this and why does it work", "what are the steps and why are they valid"}},
    {"topic.definition", Dimension::topic, 0, 1, 0.90, "",
     {"what is the definition of", "what does it mean for"}},
    {"topic.how_to", Dimension::topic, 1, 0, 0.90, "",
     {"how do I compute", "what are the steps to solve"}},
    // followup: E=0 EA=1 S=2
    {"followup.confusion", Dimension::followup, 0, 1, 0.35, "CONFUSION_IS_ENGAGE",
     {"I don't know where to start", "I'm stuck on this part", "I don't understand this step"}},
    {"followup.continue", Dimension::followup, 0, 1, 0.90, "",
     {"ok let me try the next step", "that makes sense, so next I"}},
    {"followup.demand", Dimension::followup, 1, 0, 0.90, "",
     {"just tell me the answer already", "can you just show me the solution"}},
    {"followup.switch", Dimension::followup, 2, 0, 0.85, "",
     {"never mind, different question", "forget this one, can we talk about the quiz"}},
};

const char* subject_for(TopicArea area) {
    switch (area) {
        case TopicArea::logic: return "a conditional statement";
        case TopicArea::proof: return "proof by induction";
        case TopicArea::set_theory: return "the power set";
        case TopicArea::combinatorics: return "counting permutations";
        case TopicArea::other: return "this exercise";
    }
    return "this exercise";
}

constexpr std::array<const char*, 4> kTutorLines{
    "Let's break it down. What do you already know about {}?",
    "Good question. Try writing out the smallest case first.",
    "Think about what the statement requires in this situation.",
    "You are close. Which part of {} feels unclear?",
};

constexpr std::array<const char*, 4> kFillerLines{
    "okay, give me a second",
    "hmm, I see what you mean",
    "alright, I am thinking about it",
    "I wrote the first line down",
};

std::string fill(const char* pattern, const char* subject) {
    std::string s = pattern;
    if (auto pos = s.find("{}"); pos != std::string::npos) s.replace(pos, 2, subject);
    return s;
}

std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

template <std::size_t N>
void check_distribution(const std::array<double, N>& p, const char* what) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0 || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " probabilities must be non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument(std::string(what) + " probabilities must sum to 1");
}

/// Exactly-apportioned category list in random order.
template <std::size_t N>
std::vector<int> dealt_categories(Rng& rng, std::size_t n, const std::array<double, N>& p) {
    auto counts = apportion(static_cast<std::int64_t>(n), std::vector<double>(p.begin(), p.end()));
    std::vector<int> out;
    for (std::size_t c = 0; c < N; ++c) out.insert(out.end(), static_cast<std::size_t>(counts[c]), static_cast<int>(c));
    rng.shuffle(out);
    return out;
}

const MarkerClass& pick_class(Rng& rng, Dimension d, int category, double hard_share) {
    const MarkerClass* easy = nullptr;
    const MarkerClass* hard = nullptr;
    for (const MarkerClass& m : kCatalog) {
        if (m.dimension != d || m.gold_category != category) continue;
        (m.rule_token.empty() ? easy : hard) = &m;
    }
    if (hard && (!easy || rng.unit() < hard_share)) return *hard;
    return *easy;
}

const std::string& pick_phrase(Rng& rng, const MarkerClass& m) { return m.phrases[rng.below(m.phrases.size())]; }

}  // namespace

std::span<const MarkerClass> marker_catalog() { return kCatalog; }

void SyntheticProfile::validate() const {
    check_distribution(intent, "intent");
    check_distribution(topic, "topic");
    check_distribution(followup, "followup");
    check_distribution(length, "length");
    check_distribution(topic_area, "topic_area");
    if (hard_share < 0.0 || hard_share > 1.0) throw InvalidArgument("hard_share must lie in [0, 1]");
    if (raters < 0) throw InvalidArgument("raters must be non-negative");
    if (rater_noise < 0.0 || rater_noise > 1.0) throw InvalidArgument("rater_noise must lie in [0, 1]");
}

LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n, const SyntheticProfile& profile) {
    if (n < 1) throw InvalidArgument("synthetic dataset needs n >= 1");
    profile.validate();
    Rng rng(seed);
    const auto intents = dealt_categories(rng, n, profile.intent);
    const auto topics = dealt_categories(rng, n, profile.topic);
    const auto followups = dealt_categories(rng, n, profile.followup);
    const auto lengths = dealt_categories(rng, n, profile.length);
    const auto areas = dealt_categories(rng, n, profile.topic_area);

    LabeledDataset d;
    const int width = n >= 1000 ? static_cast<int>(std::log10(static_cast<double>(n))) + 1 : 3;
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i + 1);
        if (num.size() < static_cast<std::size_t>(width)) num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
        Session s;
        s.id = "s" + num;
        s.topic_area = static_cast<TopicArea>(areas[i]);
        s.semester = (i % 2 == 0) ? "fall" : "spring";
        const LabelSet gold = label_from_indices(intents[i], topics[i], followups[i]);
        const char* subject = subject_for(s.topic_area);

        const MarkerClass& ic = pick_class(rng, Dimension::intent, intents[i], profile.hard_share);
        const MarkerClass& tc = pick_class(rng, Dimension::topic, topics[i], profile.hard_share);
        const MarkerClass& fc = pick_class(rng, Dimension::followup, followups[i], profile.hard_share);
        const std::string opener = capitalized(pick_phrase(rng, ic)) + ". " + capitalized(pick_phrase(rng, tc)) +
                                   " " + subject + "?";
        const std::string closer = capitalized(pick_phrase(rng, fc)) + ".";

        int count = 0;
        switch (lengths[i]) {
            case 0: count = 1 + static_cast<int>(rng.below(4)); break;
            case 1: count = 5 + static_cast<int>(rng.below(6)); break;
            default: count = 11 + static_cast<int>(rng.below(6)); break;
        }
        const int last_student = (count - 1) % 2 == 0 ? count - 1 : count - 2;
        for (int e = 0; e < count; ++e) {
            Exchange x;
            x.index = e;
            x.role = e % 2 == 0 ? Role::student : Role::tutor;
            if (x.role == Role::tutor) {
                x.text = fill(kTutorLines[rng.below(kTutorLines.size())], subject);
            } else if (e == 0) {
                x.text = last_student == 0 ? opener + " " + closer : opener;
            } else if (e == last_student) {
                x.text = closer;
            } else {
                x.text = capitalized(kFillerLines[rng.below(kFillerLines.size())]) + ".";
            }
            s.exchanges.push_back(std::move(x));
        }
        d.gold.emplace(s.id, gold);
        d.sessions.push_back(std::move(s));
    }

    for (int r = 0; r < profile.raters; ++r) {
        GoldLabels& labels = d.raters["rater_" + std::to_string(r + 1)];
        for (const Session& s : d.sessions) {
            const LabelSet g = d.gold.at(s.id);
            std::array<int, 3> idx{g.index(Dimension::intent), g.index(Dimension::topic), g.index(Dimension::followup)};
            for (Dimension dim : kDimensions) {
                const auto k = static_cast<std::uint64_t>(categories(dim).size());
                if (rng.unit() < profile.rater_noise) {
                    auto& v = idx[static_cast<int>(dim)];
                    v = static_cast<int>((static_cast<std::uint64_t>(v) + 1 + rng.below(k - 1)) % k);
                }
            }
            labels.emplace(s.id, label_from_indices(idx[0], idx[1], idx[2]));
        }
    }
    return d;
}

}  // namespace labelrefine
