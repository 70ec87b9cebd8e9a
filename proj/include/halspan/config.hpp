#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "halspan/cache.hpp"
#include "halspan/dataset.hpp"
#include "halspan/detectors.hpp"
#include "halspan/llm.hpp"
#include "halspan/retrieval.hpp"
#include "halspan/search.hpp"

namespace halspan {

enum class MapperKind { kSubstring, kFactToSpan, kEditDistance };

std::string_view to_string(MapperKind kind);
MapperKind parse_mapper_kind(std::string_view name);
/// The mapper each detector is paired with by default.
MapperKind default_mapper(DetectorKind detector);

/// Everything a detect/optimize run needs. Loaded from a JSON file; backend
/// descriptors are kept as JSON and only materialized by BackendSet.
struct RunConfig {
  std::vector<std::string> languages;  // empty: all
  ContextMode context_mode = ContextMode::kFromQuestion;
  DetectorKind detector = DetectorKind::kDirect;
  std::optional<MapperKind> mapper;
  nlohmann::json search = nullptr;
  nlohmann::json llm = nullptr;
  nlohmann::json translation_llm = nullptr;  // null: reuse llm
  std::filesystem::path cache_dir = ".halspan-cache";
  std::filesystem::path output = "predictions.jsonl";
  std::optional<std::filesystem::path> prompt_file;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
  RetrievalOptions retrieval;
  DecodingParams decoding;
  FieldMap fields;

  /// Relative paths (including backend "dir" entries) resolve against
  /// `base_dir`. Throws Error(kConfigError).
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& file);

  MapperKind mapper_kind() const { return mapper.value_or(default_mapper(detector)); }
  /// Rejects detector/mapper pairs whose detection output the mapper cannot
  /// consume, and missing backends.
  void validate() const;
  /// Reproducibility snapshot: secrets redacted, execution-only settings
  /// (parallelism) omitted since they do not change results.
  nlohmann::ordered_json snapshot() const;
};

/// Reads ${VAR} from the environment for `api_key` entries; other strings
/// are never interpolated.
std::string resolve_secret(const nlohmann::json& value);

/// Owns the backends described by a RunConfig, each wrapped by the shared
/// response cache.
class BackendSet {
 public:
  explicit BackendSet(const RunConfig& config);
  ~BackendSet();

  SearchBackend* search() noexcept { return cached_search_.get(); }
  LlmBackend& llm() noexcept { return *cached_llm_; }
  LlmBackend* translator() noexcept { return cached_translator_.get(); }
  ResponseCache& cache() noexcept { return *cache_; }
  const ResponseCache& cache() const noexcept { return *cache_; }
  nlohmann::ordered_json identities() const;

 private:
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<LlmBackend> llm_;
  std::unique_ptr<LlmBackend> translator_;
  std::unique_ptr<LlmBackend> search_llm_;
  std::unique_ptr<SearchBackend> search_;
  std::unique_ptr<LlmBackend> cached_llm_;
  std::unique_ptr<LlmBackend> cached_translator_;
  std::unique_ptr<SearchBackend> cached_search_;
};

std::unique_ptr<LlmBackend> make_llm_backend(const nlohmann::json& descriptor);
std::unique_ptr<SearchBackend> make_search_backend(const nlohmann::json& descriptor,
                                                   std::unique_ptr<LlmBackend>* owned_llm);

/// Reads an optimized prompt asset ({"instruction", "demos"}).
ExtractionPrompt load_prompt_asset(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExtractionPrompt& prompt);
ExtractionPrompt prompt_from_json(const nlohmann::json& j);

}  // namespace halspan
