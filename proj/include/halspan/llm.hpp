#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace halspan {

struct DecodingParams {
  double temperature = 0.0;
  /// 0 leaves the limit to the backend.
  int max_tokens = 0;
};

struct LlmRequest {
  std::string system;
  std::string user;
  DecodingParams params;
};

struct BackendIdentity {
  std::string provider;
  std::string model;

  std::string describe() const { return provider + ":" + model; }
  bool operator==(const BackendIdentity&) const = default;
};

/// Chat-completion style text generation.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual BackendIdentity identity() const = 0;
};

nlohmann::ordered_json to_json(const LlmRequest& request);

/// Content hash of the full request as sent to `backend`.
std::string request_key(const BackendIdentity& backend, const LlmRequest& request);

/// Replays canned completions from `<dir>/<request_key>.json`. Requests with
/// no fixture throw Error(kFixtureMissing).
class MockLlmBackend final : public LlmBackend {
 public:
  explicit MockLlmBackend(std::filesystem::path fixture_dir, std::string model = "mock");

  std::string complete(const LlmRequest& request) override;
  BackendIdentity identity() const override { return {"mock", model_}; }
  std::size_t calls() const noexcept { return calls_.load(); }

  static std::filesystem::path write_fixture(const std::filesystem::path& dir,
                                             const BackendIdentity& backend,
                                             const LlmRequest& request,
                                             std::string_view response);

 private:
  std::filesystem::path dir_;
  std::string model_;
  std::atomic<std::size_t> calls_{0};
};

struct OpenAiChatConfig {
  std::string provider = "openai";
  std::string base_url = "https://api.openai.com/v1";
  std::string model;
  std::string api_key;
  int timeout_seconds = 180;
  int max_attempts = 3;
};

/// OpenAI-compatible `/chat/completions` client. Transport failures and
/// 429/5xx responses are retried, then reported as kBackendUnavailable.
class OpenAiChatBackend final : public LlmBackend {
 public:
  explicit OpenAiChatBackend(OpenAiChatConfig config);

  std::string complete(const LlmRequest& request) override;
  BackendIdentity identity() const override { return {config_.provider, config_.model}; }

 private:
  OpenAiChatConfig config_;
};

}  // namespace halspan
