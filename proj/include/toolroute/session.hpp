#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "toolroute/catalog.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/request_protocol.hpp"
#include "toolroute/routing.hpp"
#include "toolroute/tokenizer.hpp"

namespace toolroute {

enum class EventKind { user_message, model_message, tool_request, retrieval_injection, termination };
enum class SessionStatus { active, completed, tool_not_found, iteration_limit };
enum class GiveUp { proceed, not_found };

std::string_view to_string(EventKind kind);
std::string_view to_string(SessionStatus status);

struct InjectedCandidate {
  std::string server_name;
  std::string tool_name;
  double score = 0.0;
  double s_server = 0.0;
  double s_tool = 0.0;

  bool operator==(const InjectedCandidate&) const = default;
};

/// One transcript entry. `text` holds the message for user/model events, the
/// injected context for retrieval_injection (schemas or a notice), and the
/// final status for termination. The opening user_message also carries the
/// discovery prompt, which is charged to it.
struct TurnEvent {
  EventKind kind = EventKind::user_message;
  std::string text;
  std::optional<ToolRequest> request;
  std::vector<InjectedCandidate> candidates;
  bool schemas_injected = false;
  std::size_t token_cost = 0;
};

struct TokenLedger {
  std::size_t prompt_tokens = 0;
  std::size_t injected_schema_tokens = 0;
  std::size_t total_tokens = 0;

  bool operator==(const TokenLedger&) const = default;
};

struct SessionConfig {
  RoutingConfig routing;
  double not_found_floor = 0.1;
  std::size_t max_retrieval_rounds = 5;
  bool include_icl = false;
};

/// Everything a step needs to route requests. All members are read-only.
struct RouterContext {
  const Catalog& catalog;
  const EmbeddingIndex& index;
  const EmbeddingProvider& provider;
};

class Session {
 public:
  const std::vector<TurnEvent>& transcript() const noexcept { return transcript_; }
  const TokenLedger& ledger() const noexcept { return ledger_; }
  SessionStatus status() const noexcept { return status_; }
  std::size_t retrieval_rounds() const noexcept { return rounds_; }
  const SessionConfig& config() const noexcept { return config_; }
  const std::string& discovery_prompt() const noexcept { return prompt_; }
  const std::string& user_query() const noexcept { return query_; }

  /// Recomputes the ledger from the transcript and compares.
  bool ledger_consistent() const;

 private:
  friend Session start_session(const std::string&, const SessionConfig&, const Tokenizer&);
  friend void step(Session&, const std::string&, const RouterContext&);

  Session(SessionConfig config, const Tokenizer& tokenizer);
  void append(TurnEvent event);
  void terminate(SessionStatus status);

  SessionConfig config_;
  const Tokenizer* tokenizer_;
  std::string prompt_;
  std::string query_;
  std::vector<TurnEvent> transcript_;
  TokenLedger ledger_;
  SessionStatus status_ = SessionStatus::active;
  std::size_t rounds_ = 0;
  bool last_round_found_nothing_ = false;
};

/// Opens a session: the discovery prompt and the user query are charged to
/// the first user_message event. Throws Error(invalid_argument) on a blank
/// query or invalid config.
Session start_session(const std::string& user_query, const SessionConfig& cfg,
                      const Tokenizer& tokenizer = default_tokenizer());

/// Feeds one model output. Each extracted request is routed and answered with
/// a retrieval_injection (schemas, or a not-found/failure notice). An output
/// without requests ends the session; a request beyond max_retrieval_rounds
/// ends it with iteration_limit. Routing errors become events.
void step(Session& session, const std::string& model_output, const RouterContext& router);

GiveUp give_up_check(const RetrievalResult& result, double floor);

/// Conversation partner. `complete` sees the session so far and returns the
/// next model output.
class LLMClient {
 public:
  virtual ~LLMClient() = default;
  virtual std::string complete(const Session& session) = 0;
};

/// Returns canned outputs in order, then empty strings.
class ScriptedLLMClient final : public LLMClient {
 public:
  explicit ScriptedLLMClient(std::vector<std::string> outputs) : outputs_(std::move(outputs)) {}
  std::string complete(const Session& session) override;
  std::size_t calls() const noexcept { return next_; }

 private:
  std::vector<std::string> outputs_;
  std::size_t next_ = 0;
};

struct RemoteChatConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4.1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat-completions client. The discovery prompt goes out
/// as the system message; injections are sent as user messages.
class RemoteChatClient final : public LLMClient {
 public:
  explicit RemoteChatClient(RemoteChatConfig config);
  std::string complete(const Session& session) override;

 private:
  RemoteChatConfig config_;
  std::string api_key_;
};

/// Drives start_session + step until the session leaves the active state.
Session run_session(const std::string& user_query, const SessionConfig& cfg, LLMClient& llm,
                    const RouterContext& router, const Tokenizer& tokenizer = default_tokenizer());

/// Structured transcript export (schema_version 1): config, status, ledger and
/// the ordered events with kind, payload and token_cost.
OrderedJson export_transcript(const Session& session);

/// Re-runs a recorded transcript: same query, same config, the recorded model
/// outputs replayed in order.
Session replay_transcript(const OrderedJson& transcript, const RouterContext& router,
                          const Tokenizer& tokenizer = default_tokenizer());

}  // namespace toolroute
