#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "halspan/dataset.hpp"
#include "halspan/llm.hpp"
#include "halspan/search.hpp"

namespace halspan {

enum class ContextMode { kNone, kFromQuestion, kFromClaims };

std::string_view to_string(ContextMode mode);
/// Accepts "none", "from_question", "from_claims"; throws Error(kConfigError).
ContextMode parse_context_mode(std::string_view name);

struct RetrievalOptions {
  /// Passages kept per query; 0 keeps all.
  std::size_t max_passages = 5;
  /// Characters kept per passage; 0 keeps the whole text.
  std::size_t max_passage_chars = 0;
  /// Route queries through translate_to_english() first.
  bool translate = false;
};

/// Verification evidence for one instance.
struct ContextBundle {
  std::string instance_id;
  ContextMode mode = ContextMode::kFromQuestion;
  std::vector<std::string> queries;
  std::vector<Passage> passages;
  bool translated = false;

  /// Passages joined by blank lines, as shown to detectors.
  std::string text() const;
};

std::string translate_to_english(const std::string& text, LlmBackend& llm,
                                 const DecodingParams& params = {});

/// Atomic claims asserted by the answer. May be empty for answers that
/// assert nothing. Throws LlmOutputError after one repair retry.
std::vector<std::string> extract_claims(const Instance& inst, LlmBackend& llm,
                                        const DecodingParams& params = {});

/// One search with the (optionally translated) question. Throws
/// Error(kEmptyResult) when the backend returns nothing.
ContextBundle context_from_question(const Instance& inst, SearchBackend& search,
                                    LlmBackend* translator, const RetrievalOptions& options,
                                    const DecodingParams& params = {});

/// One search per extracted claim, passages deduplicated by exact text in
/// first-seen order. Falls back to context_from_question() when the answer
/// yields no claims.
ContextBundle context_from_claims(const Instance& inst, SearchBackend& search, LlmBackend& llm,
                                  LlmBackend* translator, const RetrievalOptions& options,
                                  const DecodingParams& params = {});

}  // namespace halspan
