#include "qers/http_server.hpp"

#include <httplib.h>

#include "qers/errors.hpp"

namespace qers {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, {{"error", message}}, status);
}

// Maps library exceptions to status codes.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const HttpError& e) {
        send_error(res, e.status(), e.what());
    } catch (const UnknownPreset& e) {
        send_error(res, 404, e.what());
    } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
    } catch (const DataError& e) {
        send_error(res, 400, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, e.what());
    }
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
}

ReadQuery read_query(const httplib::Request& req) {
    return QersService::parse_query(param(req, "algorithm"), param(req, "scenario"), param(req, "window"),
                                    param(req, "recompute"));
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw HttpError(400, std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

HttpServer::HttpServer(QersService& service, std::string static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& svr = *server_;
    auto& svc = service_;

    // httplib also sets SO_REUSEPORT, which would let a second server share
    // the port silently.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    svr.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    svr.Get("/api/v1/health", [&svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.health()); });
    });

    svr.Post("/api/v1/samples", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto result = svc.ingest(req.body, req.get_header_value("Content-Type"));
            const bool none = result.accepted == 0 && !result.rejected.empty();
            send_json(res, to_json(result), none ? 400 : 200);
        });
    });

    svr.Get("/api/v1/samples", [&svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { res.set_content(svc.export_samples_csv(), "text/csv"); });
    });

    svr.Get("/api/v1/scores", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.scores(read_query(req))); });
    });

    svr.Get("/api/v1/scores/export", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(svc.export_scores_csv(read_query(req).recompute), "text/csv"); });
    });

    svr.Post("/api/v1/score/preview", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.preview(parse_body(req))); });
    });

    svr.Get("/api/v1/presets", [&svc](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.presets()); });
    });

    svr.Post("/api/v1/presets", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.add_preset(parse_body(req)), 201); });
    });

    svr.Put("/api/v1/presets/active", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.set_active(parse_body(req))); });
    });

    svr.Get("/api/v1/report/heatmap", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.heatmap(read_query(req))); });
    });

    svr.Get("/api/v1/report/distribution", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.distribution(read_query(req))); });
    });

    svr.Get("/api/v1/report/scatter", [&svc](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, svc.scatter(read_query(req))); });
    });

    // Server-sent events. Each connection owns a subscription; the queue is
    // drained in publish order, with a comment line as keepalive.
    svr.Get("/api/v1/stream", [&svc](const httplib::Request&, httplib::Response& res) {
        auto sub = svc.events().subscribe();
        res.set_header("Cache-Control", "no-cache");
        res.set_header("X-Accel-Buffering", "no");
        res.set_chunked_content_provider(
            "text/event-stream",
            [sub, first = true](std::size_t, httplib::DataSink& sink) mutable {
                if (first) {
                    first = false;
                    const std::string hello = ": connected\n\n";
                    return sink.write(hello.data(), hello.size());
                }
                auto ev = sub->next(std::chrono::milliseconds(1000));
                if (!ev) {
                    if (sub->closed()) {
                        sink.done();
                        return true;
                    }
                    const std::string ping = ": keepalive\n\n";
                    return sink.write(ping.data(), ping.size());
                }
                const std::string frame =
                    "id: " + std::to_string(ev->id) + "\nevent: score\ndata: " + ev->data + "\n\n";
                return sink.write(frame.data(), frame.size());
            },
            [&svc, sub](bool) { svc.events().unsubscribe(sub); });
    });

    if (!static_dir.empty() && !svr.set_mount_point("/", static_dir)) {
        throw IoError("static directory " + static_dir + " does not exist");
    }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw IoError("cannot bind " + host + " on an ephemeral port");
    } else {
        if (!server_->bind_to_port(host, port)) {
            throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port " + std::to_string(port) +
                          " unavailable or already in use)");
        }
        port_ = port;
    }
    return port_;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::start() {
    thread_ = std::thread([this] { run(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    service_.events().close_all();
    if (server_->is_running()) server_->stop();
    if (thread_.joinable()) thread_.join();
}

} // namespace qers
