#pragma once

#include <memory>
#include <string>

#include "toolroute/engine.hpp"

namespace toolroute {

/// HTTP front for an Engine.
///   POST /v1/retrieve  {"server": ..., "tool": ..., "k"?: n, "clamp"?: bool}
///   GET  /v1/health
/// Request errors answer 400 with {"error": {"code", "field", "message"}};
/// embedding-provider failures answer 502.
class Service {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };

  explicit Service(std::shared_ptr<const Engine> engine);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks an ephemeral port. Returns the
  /// bound port. Throws Error(io_error).
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. bind() must have succeeded.
  void run();
  void stop();
  bool running() const;

  Reply handle_retrieve(const std::string& body) const;
  Reply handle_health() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace toolroute
