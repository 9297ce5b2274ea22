#pragma once

// Eigen first: httplib pulls in <resolv.h>, whose _res macro collides with
// Eigen parameter names.
#include <Eigen/Core>
#include <httplib.h>

#include <atomic>
#include <functional>
#include <string>
#include <thread>

namespace damr::testkit {

// Loopback HTTP server answering POSTs to `path` with `handler(body)`.
class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  FakeServer(const std::string& path, Handler handler) {
    server_.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_.load(); }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
};

}  // namespace damr::testkit
