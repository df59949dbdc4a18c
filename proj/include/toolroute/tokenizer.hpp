#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace toolroute {

/// Counts context tokens. Implementations must be thread-safe.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

/// Offline approximation: max(word-ish segments, ceil(bytes / 4)).
/// A word-ish segment is a maximal run of alphanumeric bytes (non-ASCII bytes
/// count as alphanumeric) or a single punctuation byte.
class ApproxTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::string id() const override { return "approx-v1"; }

  static std::size_t segments(std::string_view text);
};

const Tokenizer& default_tokenizer();

}  // namespace toolroute
