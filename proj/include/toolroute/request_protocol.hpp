#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolroute {

inline constexpr std::string_view kOpenDelimiter = "<tool_assistant>";
inline constexpr std::string_view kCloseDelimiter = "</tool_assistant>";

/// Byte offsets [start, end) into the text a request was extracted from.
struct SourceSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const SourceSpan&) const = default;
};

/// A model-authored tool request: the platform/permission domain it needs
/// (`server_text`) and the operation plus target (`tool_text`).
struct ToolRequest {
  std::string server_text;
  std::string tool_text;
  SourceSpan source_span;

  /// Field equality; spans are ignored.
  bool same_fields(const ToolRequest& other) const {
    return server_text == other.server_text && tool_text == other.tool_text;
  }
};

enum class ParseWarningKind { unclosed_block, missing_field, duplicate_field };

struct ParseWarning {
  ParseWarningKind kind;
  SourceSpan span;
  std::string message;
};

struct ExtractResult {
  std::vector<ToolRequest> requests;
  std::vector<ParseWarning> warnings;
};

/// Extracts every well-formed request block, in document order. Never throws.
///
/// Grammar (line oriented; leading/trailing whitespace and CR are ignored):
///   block  = open-line *(field-line / other-line) close-line
///   open   = "<tool_assistant>"      close = "</tool_assistant>"
///   field  = key ":" value [ws "#" comment]     key = "server" / "tool" (any case)
/// A `#` starts a comment only when preceded by whitespace. A block missing
/// either field is skipped with a warning; a repeated field keeps the last
/// value with a warning; an open line inside a block, or end of text, leaves
/// the pending block unclosed (warning, skipped).
ExtractResult extract_requests(std::string_view text);

/// Canonical block for `request`. Throws Error(format_error) when a field is
/// blank, has surrounding whitespace, spans lines, contains a block delimiter,
/// or contains a whitespace-preceded `#` (it would read back as a comment).
std::string format_request_block(const ToolRequest& request);

struct IclExample {
  std::string block;
  std::string rationale;
};

struct DiscoveryPrompt {
  std::string instruction_text;
  std::optional<IclExample> icl_example;

  /// Full prompt text: the instruction followed by the example, if any.
  std::string text() const;
};

DiscoveryPrompt build_discovery_prompt(bool include_icl);

}  // namespace toolroute
