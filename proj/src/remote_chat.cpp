#include <cstdlib>

#include "httplib.h"
#include "toolroute/errors.hpp"
#include "toolroute/session.hpp"

namespace toolroute {

RemoteChatClient::RemoteChatClient(RemoteChatConfig config) : config_(std::move(config)) {
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr) api_key_ = key;
}

std::string RemoteChatClient::complete(const Session& session) {
  if (api_key_.empty())
    throw Error(ErrorCode::provider_failure,
                "environment variable " + config_.api_key_env + " is not set");

  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", session.discovery_prompt()}});
  for (const auto& e : session.transcript()) {
    switch (e.kind) {
      case EventKind::user_message:
        messages.push_back({{"role", "user"}, {"content", e.text}});
        break;
      case EventKind::model_message:
        messages.push_back({{"role", "assistant"}, {"content", e.text}});
        break;
      case EventKind::retrieval_injection:
        messages.push_back({{"role", "user"}, {"content", "[tool lookup]\n" + e.text}});
        break;
      default:
        break;
    }
  }
  const nlohmann::json body = {{"model", config_.model}, {"messages", std::move(messages)}};

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  auto res = client.Post("/v1/chat/completions", {{"Authorization", "Bearer " + api_key_}},
                         body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::provider_failure, "transport error: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::provider_failure,
                "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::provider_failure, std::string("malformed response: ") + e.what());
  }
}

}  // namespace toolroute
