#pragma once

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace hwhelp {

class HelpService;

/// Registers the /v1 routes for `service` on `server`.
void mount_api(httplib::Server& server, HelpService& service);

/// An HTTP server bound to one HelpService.
class ApiServer {
 public:
  explicit ApiServer(HelpService& service, int worker_threads = 16);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void listen();
  void start_background();
  void stop();
  int port() const { return port_; }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace hwhelp
