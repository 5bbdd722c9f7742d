#include "labelrefine/api.hpp"

#include <httplib.h>

#include <spdlog/spdlog.h>

#include "labelrefine/diff.hpp"
#include "labelrefine/report.hpp"
#include "labelrefine/serialization.hpp"

namespace labelrefine {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, json{{"error", msg}}, status);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const NotFound& e) {
            send_error(res, 404, e.what());
        } catch (const Conflict& e) {
            send_error(res, 409, e.what());
        } catch (const InvalidArgument& e) {
            send_error(res, 400, e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("invalid JSON: ") + e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
            send_error(res, 500, e.what());
        }
    };
}

int parse_int(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw InvalidArgument(std::string("invalid ") + what + " '" + s + "'");
    }
}

int parse_version(std::string s) {
    if (!s.empty() && (s[0] == 'v' || s[0] == 'V')) s.erase(0, 1);
    return parse_int(s, "version");
}

std::unique_ptr<LabeledDataset> dataset_for(const json& manifest) {
    if (!manifest.contains("dataset") || !manifest["dataset"].is_object()) return nullptr;
    const std::string path = manifest["dataset"].value("path", "");
    const std::string hash = manifest["dataset"].value("sha256", "");
    try {
        if (path.empty() || !fs::exists(path) || sha256_file(path) != hash) return nullptr;
        return std::make_unique<LabeledDataset>(load_dataset(path));
    } catch (const Error&) {
        return nullptr;
    }
}

}  // namespace

json pending_to_json(const PendingDecision& p) {
    return json{{"pending_id", p.id},
                {"run_id", p.run_id},
                {"iteration", p.iteration},
                {"base_version", p.base_version},
                {"diff", p.diff},
                {"changelog", p.changelog},
                {"reasoning", p.reasoning},
                {"created_at", p.created_at},
                {"lowest_dimension", p.lowest_dimension},
                {"evidence", p.evidence}};
}

ApiServer::ApiServer(RunStore store, DecisionBoard& board, ApiOptions opts)
    : store_(std::move(store)), board_(board), opts_(std::move(opts)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

ApiServer::~ApiServer() { stop(); }

std::string ApiServer::url() const { return "http://" + opts_.host + ":" + std::to_string(port_); }

void ApiServer::install_routes() {
    httplib::Server& s = *server_;
    const std::string base = R"(/api(?:/v1)?/runs)";
    const std::string id = R"(/([A-Za-z0-9][A-Za-z0-9._-]*))";

    s.Get(base, guarded([this](const httplib::Request&, httplib::Response& res) {
        json out = json::array();
        for (const std::string& run_id : store_.list()) {
            const RunStatus st = store_.status(run_id);
            out.push_back(json{{"run_id", st.run_id},
                               {"kind", st.kind},
                               {"status", st.state},
                               {"iterations", st.iterations},
                               {"best_version", st.best_version ? json(*st.best_version) : json(nullptr)},
                               {"best_kappa", st.best_kappa ? json(*st.best_kappa) : json(nullptr)},
                               {"stop_reason", st.stop_reason ? json(to_string(*st.stop_reason)) : json(nullptr)},
                               {"created_at", st.created_at},
                               {"pending", board_.pending(run_id).has_value()}});
        }
        send_json(res, out);
    }));

    s.Get(base + id, guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string run_id = req.matches[1];
        const RunDir dir = store_.open(run_id);
        const RunStatus st = store_.status(run_id);
        json versions = json::array();
        for (const PromptVersion& v : dir.load_prompts())
            versions.push_back(json{{"version", v.version},
                                    {"parent", v.parent ? json(*v.parent) : json(nullptr)},
                                    {"author", to_string(v.author)},
                                    {"changelog", v.changelog},
                                    {"created_at", v.created_at}});
        send_json(res, json{{"run_id", run_id},
                            {"kind", st.kind},
                            {"status", st.state},
                            {"iterations", st.iterations},
                            {"best_version", st.best_version ? json(*st.best_version) : json(nullptr)},
                            {"stop_reason", st.stop_reason ? json(to_string(*st.stop_reason)) : json(nullptr)},
                            {"manifest", dir.manifest()},
                            {"versions", versions}});
    }));

    s.Get(base + id + "/iterations", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, json(store_.open(req.matches[1]).load_iterations()));
    }));

    s.Get(base + id + R"(/iterations/(\d+)/disagreements)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              const int i = parse_int(req.matches[2], "iteration");
              for (const IterationRecord& r : store_.open(req.matches[1]).load_iterations()) {
                  if (r.iteration != i) continue;
                  if (!r.report) throw NotFound("iteration " + std::to_string(i) + " has no disagreement report");
                  send_json(res, json(*r.report));
                  return;
              }
              throw NotFound("unknown iteration " + std::to_string(i));
          }));

    s.Get(base + id + R"(/versions/v?(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const int v = parse_int(req.matches[2], "version");
        const RunDir dir = store_.open(req.matches[1]);
        if (!fs::exists(dir.prompt_path(v))) throw NotFound("unknown prompt version v" + std::to_string(v));
        send_json(res, json(parse_prompt_file(read_file(dir.prompt_path(v)))));
    }));

    s.Get(base + id + "/diff", guarded([this](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("a") || !req.has_param("b")) throw InvalidArgument("diff needs a and b parameters");
        const RunDir dir = store_.open(req.matches[1]);
        const int a = parse_version(req.get_param_value("a"));
        const int b = parse_version(req.get_param_value("b"));
        for (int v : {a, b})
            if (!fs::exists(dir.prompt_path(v))) throw NotFound("unknown prompt version v" + std::to_string(v));
        const PromptVersion va = parse_prompt_file(read_file(dir.prompt_path(a)));
        const PromptVersion vb = parse_prompt_file(read_file(dir.prompt_path(b)));
        res.set_content(unified_diff(va.body, vb.body, "v" + std::to_string(a), "v" + std::to_string(b)),
                        "text/plain; charset=utf-8");
    }));

    s.Get(base + id + "/pending", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string run_id = req.matches[1];
        store_.open(run_id);
        int wait = req.has_param("wait_ms") ? parse_int(req.get_param_value("wait_ms"), "wait_ms") : 0;
        wait = std::clamp(wait, 0, opts_.max_wait_ms);
        const auto p = wait > 0 ? board_.wait_pending(run_id, std::chrono::milliseconds(wait)) : board_.pending(run_id);
        if (!p) {
            res.status = 204;
            return;
        }
        send_json(res, pending_to_json(*p));
    }));

    s.Post(base + id + "/decision", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string run_id = req.matches[1];
        store_.open(run_id);
        const json body = json::parse(req.body);
        if (!body.is_object()) throw InvalidArgument("decision body must be a JSON object");
        DecisionInput in;
        in.action = body.value("action", "");
        in.note = body.value("note", "");
        if (body.contains("edited_body") && !body["edited_body"].is_null())
            in.edited_body = body["edited_body"].get<std::string>();
        in.actor = body.value("actor", "web");
        if (body.contains("pending_id") && !body["pending_id"].is_null())
            in.pending_id = body["pending_id"].get<std::uint64_t>();
        board_.resolve(run_id, in);
        send_json(res, json{{"status", "accepted"}, {"action", in.action}});
    }));

    s.Get(base + id + "/report", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const RunDir dir = store_.open(req.matches[1]);
        const json manifest = dir.manifest();
        const auto dataset = dataset_for(manifest);
        if (manifest.value("kind", "run") == "cv") {
            const auto cv = dir.read_json("cv.json");
            if (!cv) throw NotFound("cross-validation still running");
            send_json(res, render_cv_report(cv_from_json(*cv), dataset.get()).data);
            return;
        }
        send_json(res, render_report(dir.load_run(), dataset.get()).data);
    }));

    s.Get(base + id + "/cv", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto cv = store_.open(req.matches[1]).read_json("cv.json");
        if (!cv) throw NotFound("run has no cross-validation results");
        send_json(res, *cv);
    }));

    if (!opts_.static_dir.empty() && fs::is_directory(opts_.static_dir)) s.set_mount_point("/", opts_.static_dir);
}

int ApiServer::bind() {
    if (opts_.port == 0) port_ = server_->bind_to_any_port(opts_.host);
    else port_ = server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1;
    if (port_ <= 0) throw IoError("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
    return port_;
}

int ApiServer::start() {
    bind();
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ApiServer::run() {
    bind();
    server_->listen_after_bind();
}

void ApiServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace labelrefine
