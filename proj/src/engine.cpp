#include "labelrefine/engine.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "labelrefine/diff.hpp"

namespace labelrefine {

void StopPolicy::validate() const {
    if (epsilon < 0.0) throw ConfigError("stop epsilon must be >= 0");
    if (patience < 1) throw ConfigError("stop patience must be >= 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::plateau: return "plateau";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::converged: return "converged";
        case StopReason::manual: return "manual";
        case StopReason::error: return "error";
    }
    return "unknown";
}

StopReason parse_stop_reason(std::string_view s) {
    for (StopReason r : {StopReason::plateau, StopReason::max_iterations, StopReason::converged, StopReason::manual,
                         StopReason::error})
        if (to_string(r) == s) return r;
    throw SchemaError("invalid stop reason '" + std::string(s) + "'");
}

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::approved: return "approved";
        case Decision::vetoed: return "vetoed";
        case Decision::edited: return "edited";
        case Decision::auto_applied: return "auto";
    }
    return "unknown";
}

Decision parse_decision(std::string_view s) {
    for (Decision d : {Decision::approved, Decision::vetoed, Decision::edited, Decision::auto_applied})
        if (to_string(d) == s) return d;
    throw SchemaError("invalid decision '" + std::string(s) + "'");
}

std::optional<StopReason> should_stop(std::span<const double> history, const StopPolicy& p) {
    if (history.empty()) throw InvalidArgument("should_stop needs a non-empty history");
    const auto steps = static_cast<int>(history.size()) - 1;
    if (p.epsilon > 0.0 && steps >= p.patience) {
        bool flat = true;
        for (std::size_t i = history.size() - static_cast<std::size_t>(p.patience); i < history.size(); ++i)
            flat = flat && (history[i] - history[i - 1] < p.epsilon);
        if (flat) return StopReason::plateau;
    }
    if (steps >= p.max_iterations) return StopReason::max_iterations;
    return std::nullopt;
}

std::vector<RegressionEvent> detect_regressions(std::span<const VersionMetrics> history, double threshold) {
    std::vector<RegressionEvent> events;
    auto check = [&](const std::string& metric, const VersionMetrics& a, const VersionMetrics& b, double from,
                     double to) {
        if (from - to > threshold + 1e-9) events.push_back({metric, a.version, b.version, from, to, to - from});
    };
    for (std::size_t i = 1; i < history.size(); ++i) {
        const VersionMetrics& a = history[i - 1];
        const VersionMetrics& b = history[i];
        for (Dimension d : kDimensions) {
            auto fa = a.per_dimension.find(d);
            auto fb = b.per_dimension.find(d);
            if (fa != a.per_dimension.end() && fb != b.per_dimension.end())
                check(std::string(to_string(d)), a, b, fa->second, fb->second);
        }
        check("overall", a, b, a.overall, b.overall);
    }
    return events;
}

const PromptVersion& RunRecord::version(int v) const {
    auto it = std::find_if(versions.begin(), versions.end(), [v](const PromptVersion& p) { return p.version == v; });
    if (it == versions.end()) throw NotFound("unknown prompt version v" + std::to_string(v));
    return *it;
}

std::vector<VersionMetrics> RunRecord::version_history() const {
    std::vector<VersionMetrics> out;
    for (const IterationRecord& r : iterations)
        if (!r.eval_reused) out.push_back({r.prompt_version, r.eval.per_dimension_kappa, r.eval.overall_kappa});
    return out;
}

TokenUsage RunRecord::classifier_usage() const {
    return iterations.empty() ? TokenUsage{} : iterations.back().classifier_usage_total;
}

TokenUsage RunRecord::agent_usage() const {
    return iterations.empty() ? TokenUsage{} : iterations.back().agent_usage_total;
}

int select_best(std::span<const IterationRecord> iterations) {
    if (iterations.empty()) throw InvalidArgument("select_best needs at least one evaluated iteration");
    const IterationRecord* best = &iterations.front();
    for (const IterationRecord& r : iterations) {
        if (r.eval.overall_kappa > best->eval.overall_kappa ||
            (r.eval.overall_kappa == best->eval.overall_kappa && r.prompt_version < best->prompt_version))
            best = &r;
    }
    return best->prompt_version;
}

int select_best(const RunRecord& run) { return select_best(run.iterations); }

int DisagreementReport::disagreement_count(Dimension d) const {
    auto it = groups.find(d);
    if (it == groups.end()) return 0;
    int n = 0;
    for (const DisagreementGroup& g : it->second) n += g.count;
    return n;
}

int DisagreementReport::total() const {
    int n = 0;
    for (Dimension d : kDimensions) n += disagreement_count(d);
    return n;
}

namespace {

std::string utf8_prefix(const std::string& s, std::size_t budget) {
    if (s.size() <= budget) return s;
    std::size_t cut = budget;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return s.substr(0, cut) + "...";
}

}  // namespace

std::string session_excerpt(const Session& s, std::size_t budget) {
    std::size_t last_student = s.exchanges.size();
    for (std::size_t i = s.exchanges.size(); i-- > 0;)
        if (s.exchanges[i].role == Role::student) {
            last_student = i;
            break;
        }
    if (last_student == s.exchanges.size()) return utf8_prefix(s.exchanges.empty() ? "" : s.exchanges.back().text, budget);
    std::string out;
    for (std::size_t i = last_student; i-- > 0;)
        if (s.exchanges[i].role == Role::tutor) {
            out = "Tutor: " + s.exchanges[i].text + "\n";
            break;
        }
    out += "Student: " + s.exchanges[last_student].text;
    return utf8_prefix(out, budget);
}

DisagreementReport build_disagreement_report(const EvalResult& e, const LabeledDataset& d, std::size_t excerpt_chars) {
    if (e.disagreements.empty()) throw InvalidArgument("no disagreements to report");
    DisagreementReport r;
    r.kappas = e.per_dimension_kappa;
    std::map<Dimension, std::map<std::pair<std::string, std::string>, DisagreementGroup>> grouped;
    for (const Disagreement& x : e.disagreements) {
        DisagreementGroup& g = grouped[x.dimension][{x.predicted, x.gold}];
        g.predicted = x.predicted;
        g.gold = x.gold;
        ++g.count;
        g.session_ids.push_back(x.session_id);
        g.excerpts.push_back(session_excerpt(d.session(x.session_id), excerpt_chars));
    }
    for (auto& [dim, groups] : grouped) {
        auto& list = r.groups[dim];
        for (auto& [_, g] : groups) list.push_back(std::move(g));
        std::stable_sort(list.begin(), list.end(),
                         [](const DisagreementGroup& a, const DisagreementGroup& b) { return a.count > b.count; });
    }
    r.lowest_kappa_dimension = Dimension::intent;
    for (Dimension dim : kDimensions)
        if (e.per_dimension_kappa.at(dim) < e.per_dimension_kappa.at(r.lowest_kappa_dimension))
            r.lowest_kappa_dimension = dim;
    return r;
}

EvalResult evaluate_prompt(const PromptVersion& prompt, const LabeledDataset& d, ChatBackend& classifier,
                           const ClassifierConfig& cfg, const ModelRoute& route, const ClassificationObserver& observer) {
    const auto predictions = classify_all(classifier, cfg, prompt, d.sessions, observer);
    PredictionMap preds;
    TokenUsage usage;
    std::vector<Prediction> unparsed;
    for (const Prediction& p : predictions) {
        preds.emplace(p.session_id, p.labels);
        usage += p.usage;
        if (!p.parsed()) unparsed.push_back(p);
    }
    EvalResult r = score_predictions(prompt.version, preds, d.gold);
    r.unparsed = std::move(unparsed);
    r.usage = usage;
    r.cost = estimate_cost(usage, route.classifier_model, route.prices);
    return r;
}

PromptVersion baseline_prompt(const Codebook& cb, const std::string& created_at) {
    PromptVersion v;
    v.version = 0;
    v.body = baseline_prompt_body(cb);
    v.changelog = "baseline: codebook definitions";
    v.created_at = created_at;
    v.author = Author::human;
    return v;
}

RunRecord run_refinement(const LabeledDataset& d, const PromptVersion& p0, const StopPolicy& policy, EngineDeps& deps,
                         std::string run_id, std::optional<RunRecord> resume) {
    policy.validate();
    if (p0.body.empty()) throw InvalidArgument("baseline prompt is empty");
    if (!validate_dataset(d.sessions, d.gold).valid()) throw ValidationError("dataset is not valid");

    RunRecord run;
    if (resume) {
        run = std::move(*resume);
        if (run.stop_reason) return run;
        if (run.versions.empty()) run.versions.push_back(p0);
    } else {
        run.run_id = std::move(run_id);
        run.versions.push_back(p0);
        if (deps.sink) deps.sink->on_prompt_version(p0);
    }

    PromptVersion current = run.versions.front();
    std::optional<EvalResult> last_eval;
    std::vector<double> history;
    std::vector<HistoryEntry> context_history;
    TokenUsage classifier_total, agent_total;
    for (const IterationRecord& r : run.iterations) {
        if (!r.eval_reused) {
            history.push_back(r.eval.overall_kappa);
            context_history.push_back({r.prompt_version, r.eval.per_dimension_kappa, r.eval.overall_kappa});
        }
    }
    if (!run.iterations.empty()) {
        const IterationRecord& last = run.iterations.back();
        current = run.version(last.applied_version.value_or(last.prompt_version));
        if (!last.applied_version) last_eval = last.eval;
        classifier_total = last.classifier_usage_total;
        agent_total = last.agent_usage_total;
    }
    // A version written just before a crash has no logged iteration yet; it
    // is recreated when that iteration is replayed.
    std::erase_if(run.versions, [&](const PromptVersion& v) { return v.version > current.version; });

    auto cost_so_far = [&] {
        return estimate_cost(classifier_total, deps.route.classifier_model, deps.route.prices) +
               estimate_cost(agent_total, deps.route.agent_model, deps.route.prices);
    };
    auto finish_record = [&](IterationRecord& rec) {
        rec.finished_at = deps.clock();
        rec.classifier_usage_total = classifier_total;
        rec.agent_usage_total = agent_total;
        rec.cumulative_cost = cost_so_far();
        run.iterations.push_back(rec);
        if (deps.sink) deps.sink->on_iteration(rec);
    };

    for (int i = static_cast<int>(run.iterations.size());; ++i) {
        IterationRecord rec;
        rec.iteration = i;
        rec.prompt_version = current.version;
        rec.started_at = deps.clock();

        if (last_eval && last_eval->prompt_version == current.version) {
            rec.eval = *last_eval;
            rec.eval_reused = true;
        } else {
            try {
                rec.eval = evaluate_prompt(current, d, deps.classifier, deps.classifier_config, deps.route, deps.observer);
            } catch (const TransportError& e) {
                spdlog::error("evaluation of v{} aborted: {}", current.version, e.what());
                run.stop_reason = StopReason::error;
                run.error = e.what();
                break;
            }
            classifier_total += rec.eval.usage;
            history.push_back(rec.eval.overall_kappa);
            context_history.push_back({rec.prompt_version, rec.eval.per_dimension_kappa, rec.eval.overall_kappa});
        }
        last_eval = rec.eval;

        std::optional<StopReason> stop;
        if (rec.eval.disagreements.empty()) stop = StopReason::converged;
        else if (!rec.eval_reused) stop = should_stop(history, policy);
        if (!stop && i >= policy.max_iterations) stop = StopReason::max_iterations;
        if (stop) {
            rec.stop_reason = stop;
            finish_record(rec);
            run.stop_reason = stop;
            break;
        }

        rec.report = build_disagreement_report(rec.eval, d, deps.excerpt_chars);
        AgentContext ctx{current, *rec.report, deps.codebook, context_history, {}};
        bool manual_stop = false;
        for (int attempt = 0; attempt <= deps.max_reproposals; ++attempt) {
            ProposedRevision proposal;
            try {
                proposal = propose_revision(deps.agent, ctx);
            } catch (const NoUsableRevision& e) {
                rec.decision_note = std::string("skipped: ") + e.what();
                break;
            } catch (const TransportError& e) {
                rec.decision_note = std::string("agent transport error: ") + e.what();
                rec.stop_reason = StopReason::error;
                run.error = e.what();
                break;
            }
            agent_total += proposal.usage;

            ReviewRequest request{run.run_id, i, current, proposal,
                                  unified_diff(current.body, proposal.new_body, "v" + std::to_string(current.version),
                                               "proposed"),
                                  &*rec.report};
            ReviewOutcome outcome = deps.review.decide(request);
            manual_stop = outcome.stop_run;

            if (outcome.decision == Decision::vetoed) {
                rec.vetoed_attempts.push_back({proposal, outcome.note, outcome.actor});
                ctx.veto_notes.push_back(proposal.changelog + " vetoed: " + outcome.note);
                rec.proposal = proposal;
                rec.decision = Decision::vetoed;
                rec.actor = outcome.actor;
                rec.decision_note = outcome.note;
                if (manual_stop) break;
                if (attempt == deps.max_reproposals)
                    rec.decision_note += " (iteration skipped after " + std::to_string(attempt + 1) + " vetoes)";
                continue;
            }

            PromptVersion next;
            next.version = current.version + 1;
            next.parent = current.version;
            next.changelog = proposal.changelog;
            next.reasoning = proposal.reasoning;
            if (outcome.decision == Decision::edited) {
                if (!outcome.edited_body || outcome.edited_body->empty())
                    throw InvalidArgument("edit decision without a prompt body");
                next.body = *outcome.edited_body;
                next.author = Author::human;
            } else {
                next.body = proposal.new_body;
                next.author = Author::agent;
            }
            next.created_at = deps.clock();
            if (deps.sink) deps.sink->on_prompt_version(next);
            run.versions.push_back(next);

            rec.proposal = proposal;
            rec.decision = outcome.decision;
            rec.decision_note = outcome.note;
            rec.actor = outcome.actor;
            rec.applied_version = next.version;
            current = next;
            break;
        }
        if (manual_stop && !rec.stop_reason) rec.stop_reason = StopReason::manual;
        finish_record(rec);
        if (rec.stop_reason) {
            run.stop_reason = rec.stop_reason;
            break;
        }
    }

    if (!run.iterations.empty()) run.best_version = select_best(run);
    if (deps.sink) deps.sink->on_finish(run);
    return run;
}

}  // namespace labelrefine
