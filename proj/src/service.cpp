#include "toolroute/service.hpp"

#include <httplib.h>

#include "toolroute/errors.hpp"

namespace toolroute {

namespace {

std::string error_body(const Error& e) {
  OrderedJson j = {{"error",
                    {{"code", std::string(to_string(e.code()))},
                     {"field", e.path()},
                     {"message", e.what()}}}};
  return j.dump();
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::provider_failure: return 502;
    case ErrorCode::invalid_argument:
    case ErrorCode::empty_request_field:
    case ErrorCode::empty_text:
    case ErrorCode::malformed_document:
    case ErrorCode::schema_violation:
    case ErrorCode::format_error: return 400;
    default: return 500;
  }
}

}  // namespace

struct Service::Impl {
  std::shared_ptr<const Engine> engine;
  httplib::Server server;
  bool bound = false;
};

Service::Service(std::shared_ptr<const Engine> engine) : impl_(std::make_unique<Impl>()) {
  if (!engine) throw Error(ErrorCode::invalid_argument, "service needs an engine");
  impl_->engine = std::move(engine);
  auto& srv = impl_->server;
  srv.Post("/v1/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
    auto reply = handle_retrieve(req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    auto reply = handle_health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw Error(ErrorCode::invalid_argument, "port out of range", "port");
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound <= 0)
    throw Error(ErrorCode::io_error, "cannot bind", host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void Service::run() {
  if (!impl_->bound) throw Error(ErrorCode::invalid_argument, "service is not bound");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

Service::Reply Service::handle_retrieve(const std::string& body) const {
  try {
    return {200, impl_->engine->retrieve_json(body)};
  } catch (const Error& e) {
    return {status_for(e.code()), error_body(e)};
  } catch (const std::exception& e) {
    return {500, error_body(Error(ErrorCode::invalid_argument, e.what()))};
  }
}

Service::Reply Service::handle_health() const { return {200, impl_->engine->health().dump()}; }

}  // namespace toolroute
