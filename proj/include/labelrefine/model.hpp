#pragma once

// Domain types shared by every module: sessions, labels, codebook,
// prompt versions and predictions. All of them are plain value types.

#include <array>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace labelrefine {

enum class Role { student, tutor };
enum class TopicArea { logic, proof, set_theory, combinatorics, other };

enum class Intent { AS, HL, OT };
enum class Topic { C, P };
enum class Followup { E, EA, S };

enum class Dimension { intent, topic, followup };

inline constexpr std::array<Dimension, 3> kDimensions{Dimension::intent, Dimension::topic,
                                                      Dimension::followup};

std::string_view to_string(Role r);
std::string_view to_string(TopicArea t);
std::string_view to_string(Intent v);
std::string_view to_string(Topic v);
std::string_view to_string(Followup v);
std::string_view to_string(Dimension d);

// Strict parsers: anything outside the fixed code list throws SchemaError.
Role parse_role(std::string_view s);
TopicArea parse_topic_area(std::string_view s);
Intent parse_intent(std::string_view s);
Topic parse_topic(std::string_view s);
Followup parse_followup(std::string_view s);
Dimension parse_dimension(std::string_view s);

/// Ordered category codes of a dimension, e.g. intent -> {AS, HL, OT}.
std::span<const std::string_view> categories(Dimension d);

/// Display name for a category code ("AS" -> "Answer-Seeking").
std::string_view long_name(Dimension d, std::string_view code);

struct Exchange {
    Role role = Role::student;
    std::string text;
    int index = 0;

    bool operator==(const Exchange&) const = default;
};

struct Session {
    std::string id;
    std::vector<Exchange> exchanges;
    TopicArea topic_area = TopicArea::other;
    std::optional<std::string> semester;

    bool operator==(const Session&) const = default;
};

struct LabelSet {
    Intent intent = Intent::AS;
    Topic topic = Topic::C;
    Followup followup = Followup::E;

    /// Position of this label's category within categories(d).
    int index(Dimension d) const;
    std::string_view code(Dimension d) const;

    bool operator==(const LabelSet&) const = default;
};

/// Builds a LabelSet from per-dimension category indices.
LabelSet label_from_indices(int intent, int topic, int followup);

using GoldLabels = std::map<std::string, LabelSet>;

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct ParseFailure {
    std::string reason;
    bool operator==(const ParseFailure&) const = default;
};

using ParsedLabels = std::variant<LabelSet, ParseFailure>;

struct Prediction {
    std::string session_id;
    ParsedLabels labels;
    std::string raw_output;
    TokenUsage usage;

    bool parsed() const { return std::holds_alternative<LabelSet>(labels); }
    bool operator==(const Prediction&) const = default;
};

using PredictionMap = std::map<std::string, ParsedLabels>;

enum class Author { human, agent, merge };
std::string_view to_string(Author a);
Author parse_author(std::string_view s);

struct PromptVersion {
    int version = 0;
    std::optional<int> parent;
    std::string body;
    std::string changelog;
    std::string reasoning;
    std::string created_at;
    Author author = Author::human;

    bool operator==(const PromptVersion&) const = default;
};

/// Dimension -> category code -> definition text.
using Codebook = std::map<Dimension, std::map<std::string, std::string>>;

/// Definitions for the three labeling dimensions used in the tutoring study.
const Codebook& default_codebook();

/// Throws ValidationError when a category lacks a non-empty definition.
void check_codebook(const Codebook& cb);

/// Prompt v0: the codebook definitions rendered as labeling instructions.
std::string baseline_prompt_body(const Codebook& cb);

struct DatasetIssue {
    enum class Kind { missing_gold, duplicate_id, empty_session, empty_text, bad_index, orphan_gold };
    Kind kind;
    std::string session_id;
    std::string detail;
};
std::string_view to_string(DatasetIssue::Kind k);

struct ValidationReport {
    std::vector<DatasetIssue> issues;
    bool valid() const { return issues.empty(); }
    std::size_t count(DatasetIssue::Kind k) const;
};

ValidationReport validate_dataset(std::span<const Session> sessions, const GoldLabels& gold);

/// Throws ValidationError when an ancestry chain is broken or non-decreasing.
void check_lineage(std::span<const PromptVersion> versions);

/// Source of UTC ISO-8601 timestamps.
using Clock = std::function<std::string()>;

Clock system_clock();

/// Deterministic clock: each call advances one second from a fixed epoch.
Clock logical_clock(std::int64_t start_epoch_seconds = 1767225600);

std::string format_utc(std::int64_t epoch_seconds);

}  // namespace labelrefine
