#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "halspan/dataset.hpp"
#include "halspan/llm.hpp"
#include "halspan/retrieval.hpp"

namespace halspan {

enum class DetectorKind { kDirect, kKnowledgeGraph, kMinRevision };

std::string_view to_string(DetectorKind kind);
/// Accepts "direct", "kg", "min_revision"; throws Error(kConfigError).
DetectorKind parse_detector_kind(std::string_view name);

struct Extraction {
  std::string text;
  double probability = 1.0;

  bool operator==(const Extraction&) const = default;
};

struct ExtractedSpans {
  std::vector<Extraction> items;
};
struct FalseFacts {
  std::vector<std::string> facts;
};
struct CorrectedAnswer {
  std::string text;
};

/// A detector's verdict before span mapping, with every raw model reply.
struct Detection {
  std::variant<ExtractedSpans, FalseFacts, CorrectedAnswer> result;
  DetectorKind detector = DetectorKind::kDirect;
  std::vector<std::string> raw_outputs;
  int retries = 0;
  std::vector<std::string> warnings;
};

/// A worked example shown to the extraction model.
struct Demo {
  std::string instance_id;
  std::string question;
  std::string answer;
  std::string context_digest;
  std::vector<std::string> span_texts;

  bool operator==(const Demo&) const = default;
};

/// System prompt of the direct detector: an instruction plus optional
/// few-shot demonstrations appended after it.
struct ExtractionPrompt {
  std::string instruction;
  std::vector<Demo> demos;

  /// The stock instruction for runs with retrieved context, or the
  /// context-free variant.
  static ExtractionPrompt defaults(bool with_context);
  std::string system_prompt() const;
};

LlmRequest direct_request(const ContextBundle* context, const Instance& inst,
                          const ExtractionPrompt& prompt, const DecodingParams& params = {});

/// Direct text extraction. `context` may be null for a context-free run;
/// `prompt` defaults to ExtractionPrompt::defaults(context != nullptr).
Detection detect_direct(const ContextBundle* context, const Instance& inst, LlmBackend& llm,
                        const ExtractionPrompt* prompt = nullptr,
                        const DecodingParams& params = {});

struct Triple {
  std::string subject;
  std::string relation;
  std::string object;
  /// Index of the passage the triple was extracted from.
  std::size_t passage = 0;
};

struct KnowledgeGraph {
  std::vector<Triple> triples;

  /// Triples whose subject or object is named in `text` (ASCII
  /// case-insensitive).
  std::vector<const Triple*> mentioning(std::string_view text) const;
};

/// One extraction call per passage; duplicate triples keep their first
/// passage. Throws Error(kPrecondition) for an empty bundle.
KnowledgeGraph build_kg(const ContextBundle& context, LlmBackend& llm,
                        const DecodingParams& params = {},
                        std::vector<std::string>* raw_outputs = nullptr);

/// Decomposes the answer into facts and checks each against the graph built
/// from `context`. Facts whose entities are absent from the graph count as
/// unsupported.
Detection detect_kg(const ContextBundle* context, const Instance& inst, LlmBackend& llm,
                    const DecodingParams& params = {});

LlmRequest min_revision_request(const ContextBundle* context, const Instance& inst,
                                const DecodingParams& params = {});

/// Minimal-change correction of the answer. A reply without
/// <corrected_answer> tags is re-prompted once, then raises
/// LlmOutputError(kMissingTag).
Detection detect_min_revision(const ContextBundle* context, const Instance& inst,
                              LlmBackend& llm, const DecodingParams& params = {});

}  // namespace halspan
