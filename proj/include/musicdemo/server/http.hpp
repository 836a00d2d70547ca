#pragma once

#include "musicdemo/server/service.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace musicdemo::server {

struct ServerOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string weights_dir = "weights";
  std::string corpus_dir = "data";
  std::string static_dir = "web";
};

/// Loads drum-vae.weights, harmonizer.weights and every lead-sheet checkpoint
/// (any *.weights of kind "leadsheet-vae", named by file stem) from `dir`.
/// "leadsheet-vae" is the default checkpoint when present.
ModelBundle load_models(const std::filesystem::path& dir);

/// cpp-httplib front end for a DemoService. /api/... routes go to the
/// service, everything else is static content.
class HttpServer {
 public:
  HttpServer(std::shared_ptr<DemoService> service, std::filesystem::path static_dir);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  std::shared_ptr<DemoService> service_;
  std::filesystem::path static_dir_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

int run_server(const ServerOptions& options);

}  // namespace musicdemo::server
