#pragma once

// Review gates between an agent proposal and its application.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "labelrefine/engine.hpp"

namespace labelrefine {

enum class ReviewMode { auto_, cli, web };
std::string_view to_string(ReviewMode m);
ReviewMode parse_review_mode(std::string_view s);

/// Approves everything immediately.
class AutoReview : public ReviewGate {
public:
    ReviewOutcome decide(const ReviewRequest&) override {
        return {Decision::approved, "auto", std::nullopt, "auto", false};
    }
};

/// Replays a fixed decision function; used by tests and batch scripts.
class ScriptedReview : public ReviewGate {
public:
    using Fn = std::function<ReviewOutcome(const ReviewRequest&)>;
    explicit ScriptedReview(Fn fn) : fn_(std::move(fn)) {}
    ReviewOutcome decide(const ReviewRequest& r) override { return fn_(r); }

private:
    Fn fn_;
};

/// Terminal review: prints the diff and reasoning, then reads one command.
///   a | approve [note]      apply the proposal
///   v | veto <note>         reject, note goes back to the agent
///   e | edit <file>         apply the prompt read from <file>
///   q | quit [note]         veto and end the run
/// Malformed commands, and edits with an empty body, are re-prompted.
class CliReview : public ReviewGate {
public:
    CliReview(std::istream& in, std::ostream& out, std::string actor = "cli") : in_(in), out_(out), actor_(std::move(actor)) {}
    ReviewOutcome decide(const ReviewRequest& request) override;

private:
    std::istream& in_;
    std::ostream& out_;
    std::string actor_;
};

struct PendingDecision {
    std::uint64_t id = 0;
    std::string run_id;
    int iteration = 0;
    int base_version = 0;
    std::string diff;
    std::string changelog;
    std::string reasoning;
    std::string created_at;
    std::string lowest_dimension;
    std::vector<DisagreementGroup> evidence;
};

struct DecisionInput {
    std::string action;  // approve | veto | edit
    std::string note;
    std::optional<std::string> edited_body;
    std::string actor = "web";
    std::optional<std::uint64_t> pending_id;
};

/// Per-run single-slot handoff between the engine (producer of pending
/// decisions) and HTTP clients (which resolve them exactly once).
class DecisionBoard {
public:
    /// Publishes a pending decision. Conflict if the run already has one.
    std::uint64_t publish(PendingDecision pending);
    /// Blocks until the pending decision `id` is resolved, then clears it.
    ReviewOutcome await(const std::string& run_id, std::uint64_t id);
    /// NotFound when nothing was ever pending, Conflict when already
    /// decided, InvalidArgument for a bad action or an empty edit.
    void resolve(const std::string& run_id, const DecisionInput& input);

    std::optional<PendingDecision> pending(const std::string& run_id) const;
    /// Long-poll: waits up to `timeout` for a pending decision to appear.
    std::optional<PendingDecision> wait_pending(const std::string& run_id, std::chrono::milliseconds timeout) const;

private:
    struct Slot {
        std::optional<PendingDecision> pending;
        std::optional<ReviewOutcome> outcome;
        std::optional<std::uint64_t> last_resolved;
    };
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::map<std::string, Slot> slots_;
    std::uint64_t next_id_ = 1;
};

/// Publishes each proposal on the board and waits, without timeout, for a
/// decision posted through the HTTP API.
class WebReview : public ReviewGate {
public:
    WebReview(DecisionBoard& board, Clock clock = system_clock()) : board_(board), clock_(std::move(clock)) {}
    ReviewOutcome decide(const ReviewRequest& request) override;

private:
    DecisionBoard& board_;
    Clock clock_;
};

ReviewOutcome outcome_from_input(const DecisionInput& input);

}  // namespace labelrefine
