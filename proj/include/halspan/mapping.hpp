#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halspan/detectors.hpp"
#include "halspan/llm.hpp"
#include "halspan/span.hpp"

namespace halspan {

enum class EditOp { kKeep, kSubstitute, kDelete, kInsert };

struct AlignmentStep {
  EditOp op;
  /// Index into the original sequence (absent for kInsert).
  std::optional<std::size_t> original;
  /// Index into the corrected sequence (absent for kDelete).
  std::optional<std::size_t> corrected;

  bool operator==(const AlignmentStep&) const = default;
};

struct Alignment {
  std::vector<AlignmentStep> steps;
  std::size_t cost = 0;
};

/// Minimum unit-cost edit script turning `original` into `corrected`.
/// Among optimal scripts the backtrace prefers, at each cell, substitute,
/// then delete, then insert, then keep; edits therefore sit as far right as
/// possible and a substitution wins over a delete/insert pair.
template <class T>
Alignment align_sequences(std::span<const T> original, std::span<const T> corrected) {
  const std::size_t n = original.size();
  const std::size_t m = corrected.size();
  const std::size_t width = m + 1;
  std::vector<std::uint32_t> dist((n + 1) * width);
  auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return dist[i * width + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = at(i - 1, j - 1) + (original[i - 1] == corrected[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment out;
  out.cost = at(n, m);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = at(i, j);
    const bool same = i > 0 && j > 0 && original[i - 1] == corrected[j - 1];
    if (i > 0 && j > 0 && !same && at(i - 1, j - 1) + 1 == here) {
      out.steps.push_back({EditOp::kSubstitute, i - 1, j - 1});
      --i;
      --j;
    } else if (i > 0 && at(i - 1, j) + 1 == here) {
      out.steps.push_back({EditOp::kDelete, i - 1, std::nullopt});
      --i;
    } else if (j > 0 && at(i, j - 1) + 1 == here) {
      out.steps.push_back({EditOp::kInsert, std::nullopt, j - 1});
      --j;
    } else {
      out.steps.push_back({EditOp::kKeep, i - 1, j - 1});
      --i;
      --j;
    }
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

/// A whitespace-delimited token (or a single character in character mode)
/// with its character span in the source text.
struct Token {
  std::u32string text;
  CharSpan span;
};

enum class TokenMode { kWord, kCharacter };

struct TokenizeOptions {
  /// Texts whose mean whitespace-token length exceeds this are aligned per
  /// character (unsegmented scripts such as Chinese).
  double max_mean_token_chars = 15.0;
};

std::vector<Token> tokenize(std::u32string_view text, TokenMode mode);
TokenMode choose_token_mode(std::u32string_view original, std::u32string_view corrected,
                            const TokenizeOptions& options = {});

struct WordAlignment {
  Alignment alignment;
  TokenMode mode = TokenMode::kWord;
  /// Character span of each original token.
  std::vector<CharSpan> token_spans;
  std::vector<std::u32string> original_tokens;
  std::vector<std::u32string> corrected_tokens;
};

WordAlignment align_words(std::string_view original, std::string_view corrected,
                          const TokenizeOptions& options = {});

/// Characters of the original answer that the correction deleted or
/// substituted. Consecutive flagged tokens form one span including the
/// whitespace between them; insertions flag nothing.
SpanSet map_edit_distance(std::string_view original, std::string_view corrected,
                          const TokenizeOptions& options = {});

struct SpanMapping {
  SpanSet hard;
  std::vector<SoftSpan> soft;
  std::vector<std::string> warnings;
};

/// Locates each extraction verbatim, searching left to right from the end of
/// the previous match. Unmatched or empty texts are skipped with a warning.
SpanMapping map_substring(std::string_view answer, std::span<const Extraction> extracted);

/// Asks the model for the verbatim answer excerpt behind each false fact and
/// locates the excerpts in the answer (first occurrence). Excerpts that are
/// not substrings are dropped with a warning. Throws Error(kPrecondition)
/// when `facts` is empty.
SpanMapping map_facts_to_spans(std::string_view answer, std::span<const std::string> facts,
                               LlmBackend& llm, const DecodingParams& params = {},
                               std::vector<std::string>* raw_outputs = nullptr);

}  // namespace halspan
