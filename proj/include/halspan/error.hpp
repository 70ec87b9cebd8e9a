#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace halspan {

enum class ErrorKind {
  kInvertedSpan,
  kOffsetOutOfBounds,
  kLengthMismatch,
  kInvalidProbability,
  kEmptyText,
  kNoAnnotations,
  kMissingInstance,
  kMissingLabels,
  kParseError,
  kMissingField,
  kInvalidUtf8,
  kIoError,
  kBackendUnavailable,
  kEmptyResult,
  kFixtureMissing,
  kCacheCorrupt,
  kLlmParseError,
  kMissingTag,
  kInstanceMismatch,
  kFewerThanTwoSystems,
  kPrecondition,
  kConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. `line` is set for errors tied to a
/// record of a JSONL file (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }
  bool retryable() const noexcept {
    return kind_ == ErrorKind::kBackendUnavailable;
  }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

/// An LLM response that could not be turned into the expected structure.
/// Keeps every raw completion so failed instances stay auditable.
class LlmOutputError : public Error {
 public:
  LlmOutputError(ErrorKind kind, const std::string& message,
                 std::vector<std::string> raw_outputs);

  const std::vector<std::string>& raw_outputs() const noexcept {
    return raw_outputs_;
  }

 private:
  std::vector<std::string> raw_outputs_;
};

}  // namespace halspan
