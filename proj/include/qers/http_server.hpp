#pragma once

#include <memory>
#include <string>
#include <thread>

#include "qers/service.hpp"

namespace httplib {
class Server;
}

namespace qers {

// /api/v1 routes over a QersService.
class HttpServer {
public:
    explicit HttpServer(QersService& service, std::string static_dir = {});
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 picks an ephemeral port. Returns the bound port; IoError naming
    // the address when binding fails.
    int bind(const std::string& host, int port);

    // Blocks until stop().
    void run();
    // run() on a background thread; returns once the server accepts requests.
    void start();
    void stop();

    int port() const noexcept { return port_; }

private:
    QersService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace qers
