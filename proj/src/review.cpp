#include "labelrefine/review.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace labelrefine {

std::string_view to_string(ReviewMode m) {
    switch (m) {
        case ReviewMode::auto_: return "auto";
        case ReviewMode::cli: return "cli";
        case ReviewMode::web: return "web";
    }
    return "unknown";
}

ReviewMode parse_review_mode(std::string_view s) {
    if (s == "auto") return ReviewMode::auto_;
    if (s == "cli") return ReviewMode::cli;
    if (s == "web") return ReviewMode::web;
    throw ConfigError("unknown review mode '" + std::string(s) + "' (expected auto, cli or web)");
}

namespace {

std::string trimmed(std::string s) {
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

ReviewOutcome CliReview::decide(const ReviewRequest& request) {
    out_ << "\n=== Proposal for iteration " << request.iteration << " (base v" << request.current.version << ") ===\n"
         << "Changelog: " << request.proposal.changelog << "\n"
         << "Reasoning: " << request.proposal.reasoning << "\n\n"
         << (request.diff.empty() ? "(no textual change)\n" : request.diff) << "\n";
    std::string line;
    while (true) {
        out_ << "[a]pprove [note] | [v]eto <note> | [e]dit <file> | [q]uit > " << std::flush;
        if (!std::getline(in_, line)) return {Decision::vetoed, "input closed", std::nullopt, actor_, true};
        line = trimmed(line);
        const auto space = line.find(' ');
        const std::string cmd = line.substr(0, space);
        const std::string arg = space == std::string::npos ? "" : trimmed(line.substr(space + 1));
        if (cmd == "a" || cmd == "approve") return {Decision::approved, arg, std::nullopt, actor_, false};
        if (cmd == "v" || cmd == "veto") {
            if (arg.empty()) {
                out_ << "A veto needs a note explaining the problem.\n";
                continue;
            }
            return {Decision::vetoed, arg, std::nullopt, actor_, false};
        }
        if (cmd == "q" || cmd == "quit") return {Decision::vetoed, arg.empty() ? "run stopped" : arg, std::nullopt, actor_, true};
        if (cmd == "e" || cmd == "edit") {
            std::ifstream f(arg, std::ios::binary);
            std::stringstream body;
            if (f) body << f.rdbuf();
            if (arg.empty() || !f || trimmed(body.str()).empty()) {
                out_ << "Edit needs a readable, non-empty prompt file.\n";
                continue;
            }
            return {Decision::edited, "edited from " + arg, body.str(), actor_, false};
        }
        out_ << "Unrecognized command.\n";
    }
}

ReviewOutcome outcome_from_input(const DecisionInput& input) {
    if (input.action == "approve") return {Decision::approved, input.note, std::nullopt, input.actor, false};
    if (input.action == "veto") {
        if (trimmed(input.note).empty()) throw InvalidArgument("veto requires a note for the agent");
        return {Decision::vetoed, input.note, std::nullopt, input.actor, false};
    }
    if (input.action == "edit") {
        if (!input.edited_body || trimmed(*input.edited_body).empty())
            throw InvalidArgument("edit requires a non-empty edited_body");
        return {Decision::edited, input.note, input.edited_body, input.actor, false};
    }
    throw InvalidArgument("action must be approve, veto or edit");
}

std::uint64_t DecisionBoard::publish(PendingDecision pending) {
    std::lock_guard lock(mutex_);
    Slot& slot = slots_[pending.run_id];
    if (slot.pending) throw Conflict("run '" + pending.run_id + "' already has a pending decision");
    pending.id = next_id_++;
    const std::uint64_t id = pending.id;
    slot.pending = std::move(pending);
    slot.outcome.reset();
    changed_.notify_all();
    return id;
}

ReviewOutcome DecisionBoard::await(const std::string& run_id, std::uint64_t id) {
    std::unique_lock lock(mutex_);
    changed_.wait(lock, [&] {
        const Slot& s = slots_[run_id];
        return s.pending && s.pending->id == id && s.outcome;
    });
    Slot& slot = slots_[run_id];
    ReviewOutcome out = *slot.outcome;
    slot.last_resolved = id;
    slot.pending.reset();
    slot.outcome.reset();
    changed_.notify_all();
    return out;
}

void DecisionBoard::resolve(const std::string& run_id, const DecisionInput& input) {
    ReviewOutcome outcome = outcome_from_input(input);
    std::lock_guard lock(mutex_);
    auto it = slots_.find(run_id);
    if (it == slots_.end() || (!it->second.pending && !it->second.last_resolved))
        throw NotFound("no pending decision for run '" + run_id + "'");
    Slot& slot = it->second;
    if (!slot.pending) throw Conflict("decision already made");
    if (input.pending_id && *input.pending_id != slot.pending->id) throw Conflict("decision already made");
    if (slot.outcome) throw Conflict("decision already made");
    slot.outcome = std::move(outcome);
    changed_.notify_all();
}

std::optional<PendingDecision> DecisionBoard::pending(const std::string& run_id) const {
    std::lock_guard lock(mutex_);
    auto it = slots_.find(run_id);
    if (it == slots_.end() || !it->second.pending || it->second.outcome) return std::nullopt;
    return it->second.pending;
}

std::optional<PendingDecision> DecisionBoard::wait_pending(const std::string& run_id,
                                                           std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    auto ready = [&] {
        auto it = slots_.find(run_id);
        return it != slots_.end() && it->second.pending && !it->second.outcome;
    };
    if (!changed_.wait_for(lock, timeout, ready)) return std::nullopt;
    return slots_.at(run_id).pending;
}

ReviewOutcome WebReview::decide(const ReviewRequest& request) {
    PendingDecision p;
    p.run_id = request.run_id;
    p.iteration = request.iteration;
    p.base_version = request.current.version;
    p.diff = request.diff;
    p.changelog = request.proposal.changelog;
    p.reasoning = request.proposal.reasoning;
    p.created_at = clock_();
    if (request.report) {
        p.lowest_dimension = std::string(to_string(request.report->lowest_kappa_dimension));
        if (auto it = request.report->groups.find(request.report->lowest_kappa_dimension); it != request.report->groups.end())
            p.evidence = it->second;
    }
    const std::uint64_t id = board_.publish(std::move(p));
    return board_.await(request.run_id, id);
}

}  // namespace labelrefine
