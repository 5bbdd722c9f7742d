#pragma once

// Run persistence. Layout under <root>/runs/<run_id>/:
//   manifest.json      written before the first classifier call
//   prompts/vNNN.md    one immutable file per prompt version
//   iterations.jsonl   write-ahead log, one IterationRecord per line
//   run.json           final status (stop reason, best version, error)
//   report.json / report.txt
// Cross-validation runs add cv.json and folds/fold_<i>/ sub-runs.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labelrefine/engine.hpp"

namespace labelrefine {

namespace fs = std::filesystem;

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);
std::string sha256_hex(std::string_view bytes);

/// Copy of `j` with every value under a secret-looking key (api_key, token,
/// secret, password, authorization, x-api-key, ...) replaced by "***".
nlohmann::json redact_secrets(const nlohmann::json& j);

/// Writes via a temporary file and rename, with fsync.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

/// Prompt file: "---" front-matter of key: JSON-value lines, "---", body.
std::string render_prompt_file(const PromptVersion& v);
PromptVersion parse_prompt_file(std::string_view text);

/// Seconds since the epoch for a "YYYY-MM-DDTHH:MM:SSZ" timestamp.
std::int64_t parse_utc(std::string_view iso);

struct RunStatus {
    std::string run_id;
    std::string kind;  // run | cv
    std::string state;  // running | completed | error | stopped
    int iterations = 0;
    std::optional<int> best_version;
    std::optional<double> best_kappa;
    std::optional<StopReason> stop_reason;
    std::string created_at;
};

/// One run directory. Implements RunSink so the engine persists through it.
class RunDir : public RunSink {
public:
    explicit RunDir(fs::path dir) : dir_(std::move(dir)) {}

    const fs::path& path() const { return dir_; }
    fs::path prompt_path(int version) const;
    bool has_manifest() const;

    /// Creates the directory tree and writes the manifest. Conflict when a
    /// manifest already exists.
    void create(const nlohmann::json& manifest);
    nlohmann::json manifest() const;

    /// Conflict when the version already exists with a different content;
    /// an identical re-save (resume after a crash) is accepted.
    fs::path save_prompt_version(const PromptVersion& v);
    /// Durable append (fsync) of one JSON line.
    void append_iteration(const IterationRecord& rec);

    std::vector<PromptVersion> load_prompts() const;
    /// Complete lines only; a torn trailing line is ignored.
    std::vector<IterationRecord> load_iterations() const;
    /// Drops a torn trailing line so appends start on a line boundary.
    void repair_log();
    /// Reassembles the RunRecord from manifest, prompts, log and run.json.
    RunRecord load_run() const;

    void on_prompt_version(const PromptVersion& v) override { save_prompt_version(v); }
    void on_iteration(const IterationRecord& rec) override { append_iteration(rec); }
    void on_finish(const RunRecord& run) override;

    void write_json(const std::string& name, const nlohmann::json& j);
    std::optional<nlohmann::json> read_json(const std::string& name) const;
    void write_text(const std::string& name, std::string_view text);

private:
    fs::path dir_;
};

/// The runs directory under an output root.
class RunStore {
public:
    explicit RunStore(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path runs_dir() const { return root_ / "runs"; }
    RunDir run(const std::string& run_id) const;
    bool exists(const std::string& run_id) const;
    /// NotFound when the run directory has no manifest.
    RunDir open(const std::string& run_id) const;
    std::vector<std::string> list() const;
    RunStatus status(const std::string& run_id) const;

private:
    fs::path root_;
};

/// "run-YYYYMMDD-HHMMSS" style id derived from a timestamp plus a suffix.
std::string make_run_id(const std::string& created_at, const std::string& suffix = {});

}  // namespace labelrefine
