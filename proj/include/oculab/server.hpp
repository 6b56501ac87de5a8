#pragma once

// JSON-over-HTTP API on top of Service.
//
//   GET  /health
//   GET  /patients                      POST /patients {"display_name", "id"?}
//   POST /runs                          RunRequest document
//   GET  /sessions/{id}
//   GET  /sessions/{id}/stream?cursor=&wait_ms=&limit=
//   GET  /patients/{id}/trends?metric=
//   GET  /pedagogy/graph                PUT  /pedagogy/graph
//   GET  /pedagogy/progress/{student}   POST /pedagogy/progress/{student} {"topic", "component"?}
//
// Errors are {"error": {"type", "message", ...}} with 400, 404 or 409.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include "httplib.h"
#include "oculab/error.hpp"
#include "oculab/serialization.hpp"
#include "oculab/service.hpp"

namespace oculab {

inline constexpr long kMaxWaitMs = 30000;

inline json progress_view(const TopicGraph& g, const StudentProgress& p) {
    json out = to_json(p);
    json comps = json::object();
    for (const auto& [topic, _] : g.components)
        if (auto f = component_frontier(g, p, topic); !f.empty()) comps[topic] = f;
    out["frontier"] = json{{"topics", topic_frontier(g, p)}, {"components", comps}};
    return out;
}

inline json trend_json(const std::string& patient, const std::string& metric, const std::vector<TrendPoint>& pts) {
    json points = json::array();
    for (const auto& p : pts)
        points.push_back(json{{"started_at", p.started_at}, {"session_id", p.session_id}, {"value", round_sig9(p.value)}});
    return json{{"patient_id", patient}, {"metric", metric}, {"points", points}};
}

/// HTTP status and body for an exception escaping a handler.
inline std::pair<int, json> error_response(const std::exception& e) {
    auto body = [&](const char* type) { return json{{"type", type}, {"message", e.what()}}; };
    if (dynamic_cast<const NotFoundError*>(&e)) return {404, body("not_found")};
    if (dynamic_cast<const ReferentialError*>(&e)) return {404, body("referential")};
    if (dynamic_cast<const ConflictError*>(&e)) return {409, body("conflict")};
    if (const auto* x = dynamic_cast<const LockedError*>(&e)) {
        json b = body("locked");
        b["node"] = x->node();
        b["missing"] = x->missing();
        return {409, b};
    }
    if (const auto* x = dynamic_cast<const CycleError*>(&e)) {
        json b = body("cycle");
        b["path"] = x->path();
        return {400, b};
    }
    if (const auto* x = dynamic_cast<const ConfigError*>(&e)) {
        json b = body("config");
        b["fields"] = x->fields();
        return {400, b};
    }
    if (dynamic_cast<const Error*>(&e)) return {400, body("validation")};
    if (dynamic_cast<const json::exception*>(&e)) return {400, body("bad_json")};
    return {500, body("internal")};
}

class HttpServer {
public:
    explicit HttpServer(Service& service) : service_(service) { routes(); }
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;
    ~HttpServer() { stop(); }

    /// Binds (port 0 picks a free port) and serves on a background thread.
    /// Returns the bound port; throws Error when the address is unavailable.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
        return bound;
    }

    /// Blocks until stop() is called from another thread or a signal handler.
    void wait() {
        if (thread_.joinable()) thread_.join();
    }

    void stop() {
        svr_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    using Req = httplib::Request;
    using Res = httplib::Response;

    static void send(Res& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static json body_json(const Req& req) {
        if (req.body.empty()) return json::object();
        return json::parse(req.body);
    }

    static long query_long(const Req& req, const char* key, long fallback) {
        if (!req.has_param(key)) return fallback;
        const std::string v = req.get_param_value(key);
        char* end = nullptr;
        const long n = std::strtol(v.c_str(), &end, 10);
        if (v.empty() || *end != '\0' || n < 0) throw ValidationError(std::string("query parameter '") + key + "' must be a non-negative integer");
        return n;
    }

    template <class F>
    static httplib::Server::Handler guarded(F fn) {
        return [fn](const Req& req, Res& res) {
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                auto [status, body] = error_response(e);
                send(res, status, json{{"error", body}});
            }
        };
    }

    void routes() {
        svr_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        svr_.Options(R"(/.*)", [](const Req&, Res& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        svr_.Get("/health", guarded([](const Req&, Res& res) { send(res, 200, json{{"status", "ok"}}); }));

        svr_.Get("/patients", guarded([this](const Req&, Res& res) {
                     json arr = json::array();
                     for (const auto& p : service_.list_patients()) arr.push_back(to_json(p));
                     send(res, 200, arr);
                 }));

        svr_.Post("/patients", guarded([this](const Req& req, Res& res) {
                      const json b = body_json(req);
                      const auto name = detail::get_or<std::string>(b, "display_name", detail::get_or<std::string>(b, "name", ""));
                      std::optional<std::string> id;
                      if (b.contains("id") && !b.at("id").is_null()) id = b.at("id").get<std::string>();
                      send(res, 201, to_json(service_.create_patient(name, id)));
                  }));

        svr_.Post("/runs", guarded([this](const Req& req, Res& res) {
                      const RunTicket t = service_.start_run(run_request_from_json(body_json(req)));
                      json out{{"session_id", t.session_id}, {"live", t.live}};
                      if (t.record) {
                          out["status"] = "complete";
                          out["report"] = to_json(t.record->report);
                          send(res, 201, out);
                      } else {
                          out["status"] = "running";
                          out["stream"] = "/sessions/" + t.session_id + "/stream?cursor=0";
                          send(res, 202, out);
                      }
                  }));

        svr_.Get(R"(/sessions/([^/]+))", guarded([this](const Req& req, Res& res) {
                     const std::string id = req.matches[1];
                     const std::string status = service_.session_status(id);
                     if (status == "complete") {
                         res.status = 200;
                         res.set_content(service_.store().session_text(id), "application/json");
                     } else {
                         send(res, status == "running" ? 202 : 500, json{{"session_id", id}, {"status", status}});
                     }
                 }));

        svr_.Get(R"(/sessions/([^/]+)/stream)", guarded([this](const Req& req, Res& res) {
                     const std::string id = req.matches[1];
                     const auto cursor = static_cast<std::size_t>(query_long(req, "cursor", 0));
                     const long wait = std::min(query_long(req, "wait_ms", 0), kMaxWaitMs);
                     const auto limit = static_cast<std::size_t>(query_long(req, "limit", 0));
                     send(res, 200, to_json(service_.stream(id, cursor, std::chrono::milliseconds(wait), limit)));
                 }));

        svr_.Get(R"(/patients/([^/]+)/trends)", guarded([this](const Req& req, Res& res) {
                     const std::string id = req.matches[1];
                     if (!req.has_param("metric")) throw ValidationError("query parameter 'metric' is required");
                     const std::string metric = req.get_param_value("metric");
                     send(res, 200, trend_json(id, metric, service_.trend(id, metric)));
                 }));

        svr_.Get("/pedagogy/graph", guarded([this](const Req&, Res& res) { send(res, 200, to_json(service_.graph())); }));

        svr_.Put("/pedagogy/graph", guarded([this](const Req& req, Res& res) {
                     const TopicGraph g = topic_graph_from_json(body_json(req));
                     service_.put_graph(g);
                     send(res, 200, to_json(g));
                 }));

        svr_.Get(R"(/pedagogy/progress/([^/]+))", guarded([this](const Req& req, Res& res) {
                     const std::string student = req.matches[1];
                     send(res, 200, progress_view(service_.graph(), service_.progress(student)));
                 }));

        svr_.Post(R"(/pedagogy/progress/([^/]+))", guarded([this](const Req& req, Res& res) {
                      const std::string student = req.matches[1];
                      const json b = body_json(req);
                      const auto topic = detail::required<std::string>(b, "topic");
                      std::optional<std::string> component;
                      if (b.contains("component") && !b.at("component").is_null())
                          component = b.at("component").get<std::string>();
                      const StudentProgress p = service_.complete(student, topic, component);
                      send(res, 200, progress_view(service_.graph(), p));
                  }));
    }

    Service& service_;
    httplib::Server svr_;
    std::thread thread_;
};

}  // namespace oculab
