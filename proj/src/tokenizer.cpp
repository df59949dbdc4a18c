#include "toolroute/tokenizer.hpp"

#include <cctype>

namespace toolroute {

namespace {

bool is_wordish(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::size_t ApproxTokenizer::segments(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_wordish(c)) {
      if (!in_word) ++n;
      in_word = true;
    } else {
      in_word = false;
      if (std::isspace(c) == 0) ++n;
    }
  }
  return n;
}

std::size_t ApproxTokenizer::count(std::string_view text) const {
  const std::size_t by_bytes = (text.size() + 3) / 4;
  const std::size_t by_segments = segments(text);
  return by_segments > by_bytes ? by_segments : by_bytes;
}

const Tokenizer& default_tokenizer() {
  static const ApproxTokenizer instance;
  return instance;
}

}  // namespace toolroute
