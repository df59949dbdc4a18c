#include "toolroute/request_protocol.hpp"

#include "text_util.hpp"
#include "toolroute/errors.hpp"

namespace toolroute {

namespace {

// Cuts `value` at the first '#' that follows a whitespace byte.
std::string_view strip_comment(std::string_view value) {
  for (std::size_t i = 1; i < value.size(); ++i) {
    if (value[i] == '#' && detail::is_space(value[i - 1])) return value.substr(0, i);
  }
  return value;
}

bool has_comment_marker(std::string_view value) { return strip_comment(value).size() != value.size(); }

struct OpenBlock {
  std::size_t start = 0;
  std::optional<std::string> server;
  std::optional<std::string> tool;
};

void close_block(OpenBlock& block, std::size_t end, ExtractResult& out) {
  const SourceSpan span{block.start, end};
  if (!block.server || !block.tool) {
    std::string missing = !block.server && !block.tool ? "server and tool" : !block.server ? "server" : "tool";
    out.warnings.push_back({ParseWarningKind::missing_field, span, "block is missing " + missing});
    return;
  }
  out.requests.push_back({std::move(*block.server), std::move(*block.tool), span});
}

}  // namespace

ExtractResult extract_requests(std::string_view text) {
  ExtractResult out;
  std::optional<OpenBlock> open;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    const std::size_t line_end_raw = nl == std::string_view::npos ? text.size() : nl;
    std::size_t line_end = line_end_raw;
    if (line_end > pos && text[line_end - 1] == '\r') --line_end;
    const std::string_view line = text.substr(pos, line_end - pos);
    const std::string_view trimmed = detail::trim(line);

    if (trimmed == kOpenDelimiter) {
      if (open) {
        out.warnings.push_back({ParseWarningKind::unclosed_block, {open->start, pos},
                                "block opened again before being closed"});
      }
      open = OpenBlock{pos, std::nullopt, std::nullopt};
    } else if (open && trimmed == kCloseDelimiter) {
      close_block(*open, line_end, out);
      open.reset();
    } else if (open) {
      const std::size_t colon = trimmed.find(':');
      if (colon != std::string_view::npos) {
        const std::string key = detail::to_lower_ascii(detail::trim(trimmed.substr(0, colon)));
        std::optional<std::string>* field = key == "server" ? &open->server
                                            : key == "tool" ? &open->tool
                                                            : nullptr;
        const std::string_view value = detail::trim(strip_comment(trimmed.substr(colon + 1)));
        if (field != nullptr && !value.empty()) {
          if (field->has_value()) {
            out.warnings.push_back({ParseWarningKind::duplicate_field, {pos, line_end},
                                    "duplicate " + key + " field; keeping the last value"});
          }
          *field = std::string(value);
        }
      }
    }

    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  if (open) {
    out.warnings.push_back(
        {ParseWarningKind::unclosed_block, {open->start, text.size()}, "block is never closed"});
  }
  return out;
}

std::string format_request_block(const ToolRequest& request) {
  auto check = [](std::string_view value, const char* field) {
    if (detail::trim(value).empty())
      throw Error(ErrorCode::format_error, "field is empty", field);
    if (detail::trim(value).size() != value.size())
      throw Error(ErrorCode::format_error, "field has leading or trailing whitespace", field);
    if (value.find_first_of("\r\n") != std::string_view::npos)
      throw Error(ErrorCode::format_error, "field spans multiple lines", field);
    if (value.find(kOpenDelimiter) != std::string_view::npos ||
        value.find(kCloseDelimiter) != std::string_view::npos)
      throw Error(ErrorCode::format_error, "field contains a block delimiter", field);
    if (has_comment_marker(" " + std::string(value)))
      throw Error(ErrorCode::format_error, "field contains a comment marker", field);
  };
  check(request.server_text, "server");
  check(request.tool_text, "tool");

  std::string block;
  block.append(kOpenDelimiter).append("\n");
  block.append("server: ").append(request.server_text).append("\n");
  block.append("tool: ").append(request.tool_text).append("\n");
  block.append(kCloseDelimiter);
  return block;
}

std::string DiscoveryPrompt::text() const {
  if (!icl_example) return instruction_text;
  return instruction_text + "\n\nExample:\n" + icl_example->block + "\n" + icl_example->rationale;
}

DiscoveryPrompt build_discovery_prompt(bool include_icl) {
  DiscoveryPrompt prompt;
  prompt.instruction_text =
      "Tools are not preloaded. When you reach a step you cannot complete from your own "
      "knowledge, ask for a tool by writing a request block on its own lines:\n"
      "\n"
      "<tool_assistant>\n"
      "server: ...  # platform or permission domain the tool lives in\n"
      "tool: ...    # operation type and its target\n"
      "</tool_assistant>\n"
      "\n"
      "Every block starts its own lookup and the matching tool definitions are appended to the "
      "conversation. You may ask again later with a more specific request. If a lookup reports "
      "that nothing matched, refine the request or continue without tools. When no tool is "
      "needed, answer directly.";
  if (include_icl) {
    prompt.icl_example = IclExample{
        "<tool_assistant>\n"
        "server: local filesystem with read and write access\n"
        "tool: read the full contents of a file at a given path\n"
        "</tool_assistant>",
        "The server line names where the capability lives; the tool line states the concrete "
        "action and its object, phrased like tool documentation."};
  }
  return prompt;
}

}  // namespace toolroute
