#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "halspan/config.hpp"
#include "halspan/dataset.hpp"
#include "halspan/detectors.hpp"
#include "halspan/error.hpp"

namespace halspan {

/// Borrowed view of what the per-instance pipeline needs.
struct PipelineContext {
  ContextMode context_mode = ContextMode::kFromQuestion;
  DetectorKind detector = DetectorKind::kDirect;
  MapperKind mapper = MapperKind::kSubstring;
  RetrievalOptions retrieval;
  DecodingParams decoding;
  SearchBackend* search = nullptr;
  LlmBackend* llm = nullptr;
  LlmBackend* translator = nullptr;
  /// Direct-detector prompt; null uses the stock prompt.
  const ExtractionPrompt* prompt = nullptr;

  static PipelineContext from(const RunConfig& config, BackendSet& backends,
                              const ExtractionPrompt* prompt = nullptr);
};

struct FailureRecord {
  std::string id;
  std::string stage;
  ErrorKind kind = ErrorKind::kPrecondition;
  std::string message;
  std::vector<std::string> raw_outputs;
};

struct InstanceOutcome {
  Prediction prediction;
  std::optional<FailureRecord> failure;
  std::vector<std::string> warnings;
  /// Retrieval came back empty and detection ran without context.
  bool context_free = false;
};

/// retrieve -> detect -> map for one instance. Never throws for
/// per-instance problems: a failure yields an empty prediction plus a
/// FailureRecord.
InstanceOutcome run_instance(const Instance& inst, const PipelineContext& ctx);

struct CorpusRun {
  std::vector<InstanceOutcome> outcomes;

  std::size_t failures() const;
  std::size_t warnings() const;
  std::size_t context_free() const;
  std::vector<Prediction> predictions() const;
};

/// run_instance() over the corpus on `parallelism` OpenMP threads; outcomes
/// keep input order.
CorpusRun run_corpus(std::span<const Instance> instances, const PipelineContext& ctx,
                     std::size_t parallelism);

std::vector<Instance> filter_languages(std::vector<Instance> instances,
                                       const std::vector<std::string>& languages);

nlohmann::ordered_json to_json(const FailureRecord& failure);

struct DetectPaths {
  std::filesystem::path predictions;
  std::filesystem::path errors;
  std::filesystem::path manifest;

  static DetectPaths beside(const std::filesystem::path& predictions);
};

/// The manifest written next to every detect run.
nlohmann::ordered_json build_manifest(const RunConfig& config, const BackendSet& backends,
                                      const std::filesystem::path& input,
                                      const CorpusRun& run, const std::string& predictions_jsonl,
                                      const ExtractionPrompt* prompt);

struct DetectSummary {
  std::size_t instances = 0;
  std::size_t failures = 0;
  DetectPaths paths;
};

/// Full detect command: load input, run, write predictions, error sidecar
/// and manifest atomically.
DetectSummary run_detect(const RunConfig& config, const std::filesystem::path& input);

}  // namespace halspan
