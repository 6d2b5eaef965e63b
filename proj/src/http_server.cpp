#include "whatif/http_server.hpp"

#include <charconv>

// CSV uploads sent without a content type arrive as form-encoded bodies.
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (std::size_t{256} << 20)
#include <httplib.h>

#include "whatif/error.hpp"

namespace whatif {

std::pair<std::string, int> parse_listen_address(std::string_view addr) {
  const auto colon = addr.rfind(':');
  require(colon != std::string_view::npos && colon > 0, "invalid_address", "listen address must be host:port");
  const auto host = addr.substr(0, colon);
  const auto port_text = addr.substr(colon + 1);
  int port = -1;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  require(ec == std::errc{} && ptr == port_text.data() + port_text.size() && port >= 0 && port <= 65535,
          "invalid_address", "invalid port in listen address '" + std::string(addr) + "'");
  return {std::string(host), port};
}

struct HttpServer::Impl {
  Service& service;
  HttpOptions options;
  httplib::Server server;
  int port = -1;

  Impl(Service& s, HttpOptions o) : service(s), options(std::move(o)) {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.set_payload_max_length(std::size_t{256} << 20);
    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());

    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
      std::string target = req.path;
      if (const auto q = req.target.find('?'); q != std::string::npos) target += req.target.substr(q);
      const auto out = service.handle(req.method, target, req.body);
      res.status = out.status;
      res.set_content(out.body.dump(), "application/json");
    };
    server.Get(R"(/api/.*)", dispatch);
    server.Post(R"(/api/.*)", dispatch);
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const auto body = error_response(res.status, res.status == 404 ? "route_not_found" : "http_error",
                                       httplib::status_message(res.status));
      res.set_content(body.body.dump(), "application/json");
    });
  }
};

HttpServer::HttpServer(Service& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  }
  if (impl_->port < 0) {
    fail(ErrorKind::invalid_input, "bind_failed",
         "could not bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return impl_->port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace whatif
