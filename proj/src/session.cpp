#include "toolroute/session.hpp"

#include "text_util.hpp"
#include "toolroute/errors.hpp"

namespace toolroute {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::user_message: return "user_message";
    case EventKind::model_message: return "model_message";
    case EventKind::tool_request: return "tool_request";
    case EventKind::retrieval_injection: return "retrieval_injection";
    case EventKind::termination: return "termination";
  }
  return "unknown";
}

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::active: return "active";
    case SessionStatus::completed: return "completed";
    case SessionStatus::tool_not_found: return "tool_not_found";
    case SessionStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

void add_to_ledger(TokenLedger& ledger, const TurnEvent& e) {
  if (e.kind == EventKind::retrieval_injection && e.schemas_injected)
    ledger.injected_schema_tokens += e.token_cost;
  else
    ledger.prompt_tokens += e.token_cost;
  ledger.total_tokens += e.token_cost;
}

std::string not_found_notice(const ToolRequest& r) {
  return "No matching tool was found for server \"" + r.server_text + "\" and tool \"" +
         r.tool_text + "\". Refine the request, or continue without a tool.";
}

}  // namespace

Session::Session(SessionConfig config, const Tokenizer& tokenizer)
    : config_(std::move(config)), tokenizer_(&tokenizer) {}

bool Session::ledger_consistent() const {
  TokenLedger recomputed;
  for (const auto& e : transcript_) add_to_ledger(recomputed, e);
  return recomputed == ledger_;
}

void Session::append(TurnEvent event) {
  add_to_ledger(ledger_, event);
  transcript_.push_back(std::move(event));
}

void Session::terminate(SessionStatus status) {
  status_ = status;
  TurnEvent e;
  e.kind = EventKind::termination;
  e.text = std::string(to_string(status));
  append(std::move(e));
}

Session start_session(const std::string& user_query, const SessionConfig& cfg,
                      const Tokenizer& tokenizer) {
  if (detail::trim(user_query).empty())
    throw Error(ErrorCode::invalid_argument, "user query is empty", "query");
  cfg.routing.validate();
  if (cfg.max_retrieval_rounds == 0)
    throw Error(ErrorCode::invalid_argument, "max_retrieval_rounds must be positive");

  Session s(cfg, tokenizer);
  s.prompt_ = build_discovery_prompt(cfg.include_icl).text();
  s.query_ = user_query;
  TurnEvent e;
  e.kind = EventKind::user_message;
  e.text = user_query;
  e.token_cost = tokenizer.count(s.prompt_) + tokenizer.count(user_query);
  s.append(std::move(e));
  return s;
}

GiveUp give_up_check(const RetrievalResult& result, double floor) {
  if (result.candidates.empty() || result.candidates.front().score < floor) return GiveUp::not_found;
  return GiveUp::proceed;
}

void step(Session& s, const std::string& model_output, const RouterContext& router) {
  if (s.status_ != SessionStatus::active)
    throw Error(ErrorCode::invalid_argument, "session is no longer active");
  const Tokenizer& tok = *s.tokenizer_;

  TurnEvent message;
  message.kind = EventKind::model_message;
  message.text = model_output;
  message.token_cost = tok.count(model_output);
  s.append(std::move(message));

  auto extracted = extract_requests(model_output);
  if (extracted.requests.empty()) {
    s.terminate(s.last_round_found_nothing_ ? SessionStatus::tool_not_found
                                            : SessionStatus::completed);
    return;
  }
  if (s.rounds_ >= s.config_.max_retrieval_rounds) {
    s.terminate(SessionStatus::iteration_limit);
    return;
  }
  ++s.rounds_;

  bool found_any = false;
  for (auto& request : extracted.requests) {
    TurnEvent req;
    req.kind = EventKind::tool_request;
    req.text = model_output.substr(request.source_span.start,
                                   request.source_span.end - request.source_span.start);
    req.request = request;
    s.append(std::move(req));

    TurnEvent inj;
    inj.kind = EventKind::retrieval_injection;
    inj.request = request;
    try {
      auto result = route(request, router.index, router.catalog, s.config_.routing, router.provider);
      if (give_up_check(result, s.config_.not_found_floor) == GiveUp::proceed) {
        for (const auto& c : result.candidates) {
          if (!inj.text.empty()) inj.text += "\n";
          inj.text += render_tool_schema(router.catalog.tool(c.ref), router.catalog.server(c.ref.server));
          inj.candidates.push_back({c.server_name, c.tool_name, c.score, c.s_server, c.s_tool});
        }
        inj.schemas_injected = true;
        found_any = true;
      } else {
        inj.text = not_found_notice(request);
      }
    } catch (const Error& e) {
      inj.text = std::string("Tool lookup failed: ") + e.what();
    }
    inj.token_cost = tok.count(inj.text);
    s.append(std::move(inj));
  }
  s.last_round_found_nothing_ = !found_any;
}

std::string ScriptedLLMClient::complete(const Session& /*session*/) {
  if (next_ >= outputs_.size()) return {};
  return outputs_[next_++];
}

Session run_session(const std::string& user_query, const SessionConfig& cfg, LLMClient& llm,
                    const RouterContext& router, const Tokenizer& tokenizer) {
  Session s = start_session(user_query, cfg, tokenizer);
  while (s.status() == SessionStatus::active) step(s, llm.complete(s), router);
  return s;
}

// ---------------------------------------------------------------------------
// Export / replay

namespace {

OrderedJson request_json(const ToolRequest& r) {
  return OrderedJson{{"server", r.server_text},
                     {"tool", r.tool_text},
                     {"span", {r.source_span.start, r.source_span.end}}};
}

}  // namespace

OrderedJson export_transcript(const Session& s) {
  const auto& cfg = s.config();
  OrderedJson doc = OrderedJson::object();
  doc["schema_version"] = 1;
  doc["config"] = {{"m", cfg.routing.server_shortlist},
                   {"k", cfg.routing.top_k},
                   {"epsilon", cfg.routing.cluster_epsilon},
                   {"max_expanded_k", cfg.routing.max_expanded_k},
                   {"clamp", cfg.routing.clamp_similarities},
                   {"not_found_floor", cfg.not_found_floor},
                   {"max_retrieval_rounds", cfg.max_retrieval_rounds},
                   {"include_icl", cfg.include_icl}};
  doc["status"] = to_string(s.status());
  doc["retrieval_rounds"] = s.retrieval_rounds();
  doc["ledger"] = {{"prompt_tokens", s.ledger().prompt_tokens},
                   {"injected_schema_tokens", s.ledger().injected_schema_tokens},
                   {"total_tokens", s.ledger().total_tokens}};
  OrderedJson events = OrderedJson::array();
  for (const auto& e : s.transcript()) {
    OrderedJson ev = OrderedJson::object();
    ev["kind"] = to_string(e.kind);
    switch (e.kind) {
      case EventKind::tool_request:
        ev["payload"] = request_json(*e.request);
        break;
      case EventKind::retrieval_injection: {
        OrderedJson payload = request_json(*e.request);
        payload["found"] = e.schemas_injected;
        OrderedJson cands = OrderedJson::array();
        for (const auto& c : e.candidates)
          cands.push_back({{"server_name", c.server_name},
                           {"tool_name", c.tool_name},
                           {"score", c.score},
                           {"s_server", c.s_server},
                           {"s_tool", c.s_tool}});
        payload["candidates"] = std::move(cands);
        payload["text"] = e.text;
        ev["payload"] = std::move(payload);
        break;
      }
      default:
        ev["payload"] = e.text;
        break;
    }
    ev["token_cost"] = e.token_cost;
    events.push_back(std::move(ev));
  }
  doc["events"] = std::move(events);
  return doc;
}

Session replay_transcript(const OrderedJson& transcript, const RouterContext& router,
                          const Tokenizer& tokenizer) {
  try {
    if (transcript.at("schema_version").get<int>() != 1)
      throw Error(ErrorCode::malformed_document, "unsupported transcript version", "schema_version");
    const auto& c = transcript.at("config");
    SessionConfig cfg;
    cfg.routing.server_shortlist = c.at("m").get<std::size_t>();
    cfg.routing.top_k = c.at("k").get<std::size_t>();
    cfg.routing.cluster_epsilon = c.at("epsilon").get<double>();
    cfg.routing.max_expanded_k = c.at("max_expanded_k").get<std::size_t>();
    cfg.routing.clamp_similarities = c.at("clamp").get<bool>();
    cfg.not_found_floor = c.at("not_found_floor").get<double>();
    cfg.max_retrieval_rounds = c.at("max_retrieval_rounds").get<std::size_t>();
    cfg.include_icl = c.at("include_icl").get<bool>();

    std::string query;
    std::vector<std::string> outputs;
    for (const auto& ev : transcript.at("events")) {
      const auto kind = ev.at("kind").get<std::string>();
      if (kind == "user_message" && query.empty()) query = ev.at("payload").get<std::string>();
      if (kind == "model_message") outputs.push_back(ev.at("payload").get<std::string>());
    }
    ScriptedLLMClient llm(std::move(outputs));
    return run_session(query, cfg, llm, router, tokenizer);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_document, e.what(), "transcript");
  }
}

}  // namespace toolroute
