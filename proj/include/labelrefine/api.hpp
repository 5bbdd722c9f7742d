#pragma once

// HTTP API over the run store and the decision board. Every route is served
// under /api/v1 and, as an alias, /api:
//   GET  /runs
//   GET  /runs/{id}
//   GET  /runs/{id}/iterations
//   GET  /runs/{id}/iterations/{i}/disagreements
//   GET  /runs/{id}/versions/{v}
//   GET  /runs/{id}/diff?a=<v>&b=<v>
//   GET  /runs/{id}/pending[?wait_ms=N]    long-poll, 204 when nothing pending
//   POST /runs/{id}/decision               {action, note, edited_body?, actor?, pending_id?}
//   GET  /runs/{id}/report
//   GET  /runs/{id}/cv
// Errors are {"error": "..."} with 400, 404, 409 or 500.

#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "labelrefine/review.hpp"
#include "labelrefine/store.hpp"

namespace httplib {
class Server;
}

namespace labelrefine {

struct ApiOptions {
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    int max_wait_ms = 30000;
    std::string static_dir;  // optional dashboard assets mounted at /
};

nlohmann::json pending_to_json(const PendingDecision& p);

class ApiServer {
public:
    ApiServer(RunStore store, DecisionBoard& board, ApiOptions opts = {});
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    /// Throws IoError when the address cannot be bound.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const { return port_; }
    std::string url() const;

private:
    void install_routes();
    int bind();

    RunStore store_;
    DecisionBoard& board_;
    ApiOptions opts_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace labelrefine
