#include "halspan/error.hpp"

namespace halspan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvertedSpan: return "InvertedSpan";
    case ErrorKind::kOffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kInvalidProbability: return "InvalidProbability";
    case ErrorKind::kEmptyText: return "EmptyText";
    case ErrorKind::kNoAnnotations: return "NoAnnotations";
    case ErrorKind::kMissingInstance: return "MissingInstance";
    case ErrorKind::kMissingLabels: return "MissingLabels";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kMissingField: return "MissingField";
    case ErrorKind::kInvalidUtf8: return "InvalidUtf8";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kBackendUnavailable: return "BackendUnavailable";
    case ErrorKind::kEmptyResult: return "EmptyResult";
    case ErrorKind::kFixtureMissing: return "FixtureMissing";
    case ErrorKind::kCacheCorrupt: return "CacheCorrupt";
    case ErrorKind::kLlmParseError: return "LlmParseError";
    case ErrorKind::kMissingTag: return "MissingTag";
    case ErrorKind::kInstanceMismatch: return "InstanceMismatch";
    case ErrorKind::kFewerThanTwoSystems: return "FewerThanTwoSystems";
    case ErrorKind::kPrecondition: return "Precondition";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

std::string format_what(ErrorKind kind, const std::string& message,
                        std::optional<std::size_t> line) {
  std::string out;
  if (line) out += "line " + std::to_string(*line) + ": ";
  out += to_string(kind);
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(format_what(kind, message, line)),
      kind_(kind),
      line_(line),
      detail_(message) {}

LlmOutputError::LlmOutputError(ErrorKind kind, const std::string& message,
                               std::vector<std::string> raw_outputs)
    : Error(kind, message), raw_outputs_(std::move(raw_outputs)) {}

}  // namespace halspan
