#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace toolroute {

enum class ErrorCode {
  invalid_argument,
  io_error,
  malformed_document,
  schema_violation,
  empty_text,
  provider_failure,
  dimension_mismatch,
  zero_vector,
  index_mismatch,
  empty_request_field,
  format_error,
  size_exceeds_catalog,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `path()` names the offending
/// location (a catalog path such as `servers[0].tools`, a request field, or a
/// file path) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string path = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace toolroute
