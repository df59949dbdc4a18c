#include "toolroute/errors.hpp"

namespace toolroute {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::malformed_document: return "MalformedDocument";
    case ErrorCode::schema_violation: return "SchemaViolation";
    case ErrorCode::empty_text: return "EmptyText";
    case ErrorCode::provider_failure: return "ProviderFailure";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::zero_vector: return "ZeroVector";
    case ErrorCode::index_mismatch: return "IndexMismatch";
    case ErrorCode::empty_request_field: return "EmptyRequestField";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::size_exceeds_catalog: return "SizeExceedsCatalog";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& path) {
  std::string out(to_string(code));
  if (!path.empty()) {
    out += " at ";
    out += path;
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string path)
    : std::runtime_error(compose(code, message, path)), code_(code), path_(std::move(path)) {}

}  // namespace toolroute
