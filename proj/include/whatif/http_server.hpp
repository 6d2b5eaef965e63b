#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "whatif/service.hpp"

namespace whatif {

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> static_dir;  // UI assets
};

// "host:port" -> (host, port). Throws invalid_input on malformed input.
std::pair<std::string, int> parse_listen_address(std::string_view addr);

class HttpServer {
 public:
  HttpServer(Service& service, HttpOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the socket; returns the bound port.
  int bind();
  // Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace whatif
