#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "halspan/llm.hpp"

namespace halspan {

struct Passage {
  std::string source;
  std::string text;

  bool operator==(const Passage&) const = default;
};

/// Query in, ranked passages out.
class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::vector<Passage> search(const std::string& query) = 0;
  virtual BackendIdentity identity() const = 0;
};

/// Replays passages from `<dir>/<sha256(query)>.json`; unknown queries throw
/// Error(kFixtureMissing).
class FixtureSearchBackend final : public SearchBackend {
 public:
  explicit FixtureSearchBackend(std::filesystem::path fixture_dir, std::string name = "fixture");

  std::vector<Passage> search(const std::string& query) override;
  BackendIdentity identity() const override { return {"mock-search", name_}; }
  std::size_t calls() const noexcept { return calls_.load(); }

  static std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                             const std::string& query,
                                             const std::vector<Passage>& passages);

 private:
  std::filesystem::path dir_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpSearchConfig {
  std::string name = "http";
  std::string endpoint;
  std::string api_key;
  std::string query_field = "query";
  std::string count_field = "max_results";
  std::string results_key = "results";
  std::string text_key = "text";
  std::string source_key = "url";
  int max_results = 5;
  int timeout_seconds = 60;
  int max_attempts = 3;
};

/// Generic JSON search API: POSTs {query_field: q, count_field: n} with a
/// bearer token and reads `results_key[*].{text_key, source_key}`.
class HttpSearchBackend final : public SearchBackend {
 public:
  explicit HttpSearchBackend(HttpSearchConfig config);

  std::vector<Passage> search(const std::string& query) override;
  BackendIdentity identity() const override { return {"http-search", config_.name}; }

 private:
  HttpSearchConfig config_;
};

/// Uses an answer-engine style LLM (an online chat model) as the search API:
/// its completion for the query becomes the single passage.
class ChatSearchBackend final : public SearchBackend {
 public:
  explicit ChatSearchBackend(LlmBackend& llm) : llm_(llm) {}

  std::vector<Passage> search(const std::string& query) override;
  BackendIdentity identity() const override;

 private:
  LlmBackend& llm_;
};

}  // namespace halspan
