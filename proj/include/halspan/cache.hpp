#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "halspan/llm.hpp"
#include "halspan/search.hpp"

namespace halspan {

struct CacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t corrupt = 0;
};

/// Content-addressed response store, one JSON file per entry. Entries are
/// written with write-then-rename; concurrent lookups of the same key share a
/// single computation, so hit/miss counts depend only on the request multiset.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  /// A corrupt entry counts as a miss, is logged, and is overwritten on the
  /// next put().
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const nlohmann::ordered_json& meta,
           const std::string& payload);

  std::string get_or_compute(const std::string& key, const nlohmann::ordered_json& meta,
                             const std::function<std::string()>& compute);

  CacheStats stats() const;
  std::size_t entry_count() const;
  /// Removes every entry and resets the counters.
  void clear();
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_future<std::string>> in_flight_;
  CacheStats stats_;
};

class CachedLlmBackend final : public LlmBackend {
 public:
  CachedLlmBackend(LlmBackend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}

  std::string complete(const LlmRequest& request) override;
  BackendIdentity identity() const override { return inner_.identity(); }

 private:
  LlmBackend& inner_;
  ResponseCache& cache_;
};

class CachedSearchBackend final : public SearchBackend {
 public:
  CachedSearchBackend(SearchBackend& inner, ResponseCache& cache)
      : inner_(inner), cache_(cache) {}

  std::vector<Passage> search(const std::string& query) override;
  BackendIdentity identity() const override { return inner_.identity(); }

 private:
  SearchBackend& inner_;
  ResponseCache& cache_;
};

}  // namespace halspan
