#include "labelrefine/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "labelrefine/serialization.hpp"

namespace labelrefine {

namespace {

std::string hex(const unsigned char* data, unsigned int len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("SHA-256 update failed");
    }
    std::string finish() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw Error("SHA-256 final failed");
        return hex(md, len);
    }

private:
    EVP_MD_CTX* ctx_;
};

void check_run_id(const std::string& id) {
    const bool ok = !id.empty() && id.size() <= 128 && id.front() != '.' &&
                    std::all_of(id.begin(), id.end(), [](char c) {
                        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                    });
    if (!ok) throw InvalidArgument("invalid run id '" + id + "'");
}

void fsync_path(const fs::path& p, int flags) {
    int fd = ::open(p.c_str(), flags);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

bool secret_key(std::string key) {
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const char* s : {"api_key", "apikey", "api-key", "token", "secret", "password", "authorization"})
        if (key.find(s) != std::string::npos) return true;
    return key == "key";
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.finish();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    Sha256 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.finish();
}

nlohmann::json redact_secrets(const nlohmann::json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) {
            if (secret_key(k) && v.is_string()) {
                const std::string s = v.get<std::string>();
                // Environment references carry no secret themselves.
                out[k] = (s.rfind("${", 0) == 0 && s.back() == '}') ? json(s) : json("***");
            } else {
                out[k] = redact_secrets(v);
            }
        }
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const json& v : j) out.push_back(redact_secrets(v));
        return out;
    }
    return j;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0) throw IoError("cannot write '" + tmp.string() + "'");
        std::size_t done = 0;
        while (done < content.size()) {
            ssize_t n = ::write(fd, content.data() + done, content.size() - done);
            if (n < 0) {
                ::close(fd);
                throw IoError("write failed for '" + tmp.string() + "'");
            }
            done += static_cast<std::size_t>(n);
        }
        ::fsync(fd);
        ::close(fd);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
    if (path.has_parent_path()) fsync_path(path.parent_path(), O_RDONLY | O_DIRECTORY);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string render_prompt_file(const PromptVersion& v) {
    std::ostringstream out;
    out << "---\n"
        << "version: " << v.version << "\n"
        << "parent: " << (v.parent ? std::to_string(*v.parent) : "none") << "\n"
        << "author: " << to_string(v.author) << "\n"
        << "created_at: " << json(v.created_at).dump() << "\n"
        << "changelog: " << json(v.changelog).dump() << "\n"
        << "reasoning: " << json(v.reasoning).dump() << "\n"
        << "---\n"
        << v.body;
    return out.str();
}

PromptVersion parse_prompt_file(std::string_view text) {
    if (text.substr(0, 4) != "---\n") throw SchemaError("prompt file lacks front-matter");
    const auto end = text.find("\n---\n", 3);
    if (end == std::string_view::npos) throw SchemaError("unterminated prompt front-matter");
    PromptVersion v;
    bool have_version = false;
    std::istringstream header(std::string(text.substr(4, end - 3)));
    std::string line;
    while (std::getline(header, line)) {
        if (line.empty()) continue;
        const auto colon = line.find(": ");
        if (colon == std::string::npos) throw SchemaError("bad front-matter line '" + line + "'");
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 2);
        try {
            if (key == "version") {
                v.version = std::stoi(value);
                have_version = true;
            } else if (key == "parent") {
                if (value == "none") v.parent.reset();
                else v.parent = std::stoi(value);
            } else if (key == "author") {
                v.author = parse_author(value);
            } else if (key == "created_at") {
                v.created_at = json::parse(value).get<std::string>();
            } else if (key == "changelog") {
                v.changelog = json::parse(value).get<std::string>();
            } else if (key == "reasoning") {
                v.reasoning = json::parse(value).get<std::string>();
            } else {
                throw SchemaError("unknown front-matter key '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw SchemaError("bad front-matter value for '" + key + "': " + e.what());
        } catch (const std::logic_error&) {
            throw SchemaError("bad front-matter value for '" + key + "'");
        }
    }
    if (!have_version) throw SchemaError("prompt front-matter lacks a version");
    v.body = std::string(text.substr(end + 5));
    return v;
}

std::int64_t parse_utc(std::string_view iso) {
    int y, mo, d, h, mi, s;
    if (iso.size() != 20 || std::sscanf(std::string(iso).c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ", &y, &mo, &d, &h, &mi, &s) != 6)
        throw SchemaError("invalid UTC timestamp '" + std::string(iso) + "'");
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    return static_cast<std::int64_t>(timegm(&tm));
}

fs::path RunDir::prompt_path(int version) const {
    char name[32];
    std::snprintf(name, sizeof name, "v%03d.md", version);
    return dir_ / "prompts" / name;
}

bool RunDir::has_manifest() const { return fs::exists(dir_ / "manifest.json"); }

void RunDir::create(const nlohmann::json& manifest) {
    if (has_manifest()) throw Conflict("run directory '" + dir_.string() + "' already exists");
    fs::create_directories(dir_ / "prompts");
    write_file_atomic(dir_ / "manifest.json", redact_secrets(manifest).dump(2) + "\n");
}

nlohmann::json RunDir::manifest() const {
    try {
        return json::parse(read_file(dir_ / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("corrupt manifest: ") + e.what());
    }
}

fs::path RunDir::save_prompt_version(const PromptVersion& v) {
    const fs::path p = prompt_path(v.version);
    const std::string content = render_prompt_file(v);
    if (fs::exists(p)) {
        if (read_file(p) == content) return p;
        throw Conflict("prompt version v" + std::to_string(v.version) + " is already stored");
    }
    write_file_atomic(p, content);
    return p;
}

void RunDir::append_iteration(const IterationRecord& rec) {
    const std::string line = json(rec).dump() + "\n";
    const fs::path p = dir_ / "iterations.jsonl";
    int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw IoError("cannot open '" + p.string() + "'");
    std::size_t done = 0;
    while (done < line.size()) {
        ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            ::close(fd);
            throw IoError("append failed for '" + p.string() + "'");
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw IoError("fsync failed for '" + p.string() + "'");
    }
    ::close(fd);
}

std::vector<PromptVersion> RunDir::load_prompts() const {
    std::vector<PromptVersion> out;
    const fs::path dir = dir_ / "prompts";
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() < 5 || name.front() != 'v' || entry.path().extension() != ".md") continue;
        out.push_back(parse_prompt_file(read_file(entry.path())));
    }
    std::sort(out.begin(), out.end(), [](const PromptVersion& a, const PromptVersion& b) { return a.version < b.version; });
    return out;
}

std::vector<IterationRecord> RunDir::load_iterations() const {
    std::vector<IterationRecord> out;
    const fs::path p = dir_ / "iterations.jsonl";
    if (!fs::exists(p)) return out;
    const std::string text = read_file(p);
    std::size_t start = 0, line_no = 0;
    while (true) {
        const auto nl = text.find('\n', start);
        if (nl == std::string::npos) break;  // torn or empty tail
        ++line_no;
        const std::string_view line(text.data() + start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line).get<IterationRecord>());
        } catch (const json::exception& e) {
            throw SchemaError(std::string("iterations.jsonl: ") + e.what(), line_no);
        }
    }
    return out;
}

void RunDir::repair_log() {
    const fs::path p = dir_ / "iterations.jsonl";
    if (!fs::exists(p)) return;
    const std::string text = read_file(p);
    const auto last = text.rfind('\n');
    const std::size_t keep = last == std::string::npos ? 0 : last + 1;
    if (keep != text.size()) fs::resize_file(p, keep);
}

RunRecord RunDir::load_run() const {
    if (!has_manifest()) throw NotFound("no run at '" + dir_.string() + "'");
    RunRecord run;
    const json m = manifest();
    run.run_id = m.value("run_id", dir_.filename().string());
    run.config = m;
    if (m.contains("dataset") && m["dataset"].is_object()) run.dataset_fingerprint = m["dataset"].value("sha256", "");
    run.versions = load_prompts();
    run.iterations = load_iterations();
    if (auto status = read_json("run.json")) {
        if (auto it = status->find("stop_reason"); it != status->end() && !it->is_null())
            run.stop_reason = parse_stop_reason(it->get<std::string>());
        run.error = status->value("error", "");
    } else if (!run.iterations.empty() && run.iterations.back().stop_reason) {
        run.stop_reason = run.iterations.back().stop_reason;
    }
    if (!run.iterations.empty()) run.best_version = select_best(run);
    return run;
}

void RunDir::on_finish(const RunRecord& run) {
    write_json("run.json", json{{"run_id", run.run_id},
                                {"stop_reason", run.stop_reason ? json(to_string(*run.stop_reason)) : json(nullptr)},
                                {"best_version", run.best_version ? json(*run.best_version) : json(nullptr)},
                                {"iterations", run.iterations.size()},
                                {"error", run.error}});
}

void RunDir::write_json(const std::string& name, const nlohmann::json& j) {
    write_file_atomic(dir_ / name, j.dump(2) + "\n");
}

std::optional<nlohmann::json> RunDir::read_json(const std::string& name) const {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) return std::nullopt;
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw SchemaError(name + ": " + e.what());
    }
}

void RunDir::write_text(const std::string& name, std::string_view text) { write_file_atomic(dir_ / name, text); }

RunDir RunStore::run(const std::string& run_id) const {
    check_run_id(run_id);
    return RunDir(runs_dir() / run_id);
}

bool RunStore::exists(const std::string& run_id) const { return run(run_id).has_manifest(); }

RunDir RunStore::open(const std::string& run_id) const {
    RunDir d = run(run_id);
    if (!d.has_manifest()) throw NotFound("unknown run '" + run_id + "'");
    return d;
}

std::vector<std::string> RunStore::list() const {
    std::vector<std::string> out;
    if (!fs::exists(runs_dir())) return out;
    for (const auto& entry : fs::directory_iterator(runs_dir()))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

RunStatus RunStore::status(const std::string& run_id) const {
    const RunDir d = open(run_id);
    const json m = d.manifest();
    RunStatus s;
    s.run_id = run_id;
    s.kind = m.value("kind", "run");
    s.created_at = m.value("created_at", "");
    if (s.kind == "cv") {
        const auto cv = d.read_json("cv.json");
        s.state = cv ? "completed" : "running";
        if (cv) {
            s.iterations = 0;
            for (const json& f : cv->at("folds")) s.iterations += f.value("iterations", 0);
            s.best_kappa = cv->at("mean_test_kappa").get<double>();
        }
        return s;
    }
    const RunRecord run = d.load_run();
    s.iterations = static_cast<int>(run.iterations.size());
    s.best_version = run.best_version;
    s.stop_reason = run.stop_reason;
    if (run.best_version)
        for (const IterationRecord& r : run.iterations)
            if (r.prompt_version == *run.best_version) {
                s.best_kappa = r.eval.overall_kappa;
                break;
            }
    if (!d.read_json("run.json")) s.state = "running";
    else if (run.stop_reason == StopReason::error) s.state = "error";
    else if (run.stop_reason == StopReason::manual) s.state = "stopped";
    else s.state = "completed";
    return s;
}

std::string make_run_id(const std::string& created_at, const std::string& suffix) {
    std::string id = "run-";
    for (char c : created_at) {
        if (std::isdigit(static_cast<unsigned char>(c))) id.push_back(c);
        if (c == 'T') id.push_back('-');
    }
    if (!suffix.empty()) id += "-" + suffix;
    return id;
}

}  // namespace labelrefine
