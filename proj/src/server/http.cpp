#include "musicdemo/server/http.hpp"

#include "musicdemo/music/corpus.hpp"

#include <httplib.h>

#include <charconv>
#include <iostream>

namespace musicdemo::server {

namespace {

std::optional<std::uint64_t> seed_param(const httplib::Request& req) {
  if (!req.has_param("seed")) return std::nullopt;
  const std::string text = req.get_param_value("seed");
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return value;
}

void reply(httplib::Response& res, const HttpResult& result) {
  res.status = result.status;
  res.set_content(result.body, result.content_type);
}

}  // namespace

ModelBundle load_models(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  ModelBundle bundle;
  if (!fs::is_directory(dir)) throw std::runtime_error("weights directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".weights") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto weights = nn::load_weights(file);
    const auto kind = weights.kind();
    if (kind == models::DrumVae::kKind) {
      if (!bundle.drum || file.stem() == "drum-vae") {
        bundle.drum = std::make_shared<const models::DrumVae>(models::DrumVae::from_weights(weights));
      }
    } else if (kind == models::LeadSheetVae::kKind) {
      bundle.leadsheet[file.stem().string()] =
          std::make_shared<const models::LeadSheetVae>(models::LeadSheetVae::from_weights(weights));
    } else if (kind == models::Harmonizer::kKind) {
      if (!bundle.harmonizer || file.stem() == "harmonizer") {
        bundle.harmonizer = std::make_shared<const models::Harmonizer>(models::Harmonizer::from_weights(weights));
      }
    }
  }
  if (!bundle.drum) throw std::runtime_error("no drum-vae weights in '" + dir.string() + "'");
  if (!bundle.harmonizer) throw std::runtime_error("no harmonizer weights in '" + dir.string() + "'");
  if (bundle.leadsheet.empty()) throw std::runtime_error("no leadsheet-vae weights in '" + dir.string() + "'");
  bundle.default_leadsheet =
      bundle.leadsheet.contains("leadsheet-vae") ? "leadsheet-vae" : bundle.leadsheet.begin()->first;
  return bundle;
}

HttpServer::HttpServer(std::shared_ptr<DemoService> service, std::filesystem::path static_dir)
    : service_(std::move(service)), static_dir_(std::move(static_dir)), server_(std::make_unique<httplib::Server>()) {
  auto api = [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, service_->handle(req.method, req.path, req.body, seed_param(req)));
  };
  server_->Get(R"(/api/.*)", api);
  server_->Post(R"(/api/.*)", api);
  server_->Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, serve_static(static_dir_, req.path));
  });
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(R"({"error":"not found"})", "application/json");
  });
  server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(R"({"error":"internal error"})", "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

int run_server(const ServerOptions& options) {
  auto models = load_models(options.weights_dir);
  auto library = music::read_leadsheet_corpus(std::filesystem::path(options.corpus_dir) / "leadsheets.jsonl");
  auto service = std::make_shared<DemoService>(std::move(models), std::move(library));
  HttpServer server(service, options.static_dir);
  std::cerr << "serving on http://" << options.host << ':' << options.port << '\n';
  if (!server.listen(options.host, options.port)) {
    std::cerr << "error: cannot listen on " << options.host << ':' << options.port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace musicdemo::server
