#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <thread>

#include <spdlog/spdlog.h>

#include "halspan/error.hpp"
#include "halspan/llm.hpp"
#include "halspan/search.hpp"

namespace halspan {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::kConfigError, "URL without scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient(int status) { return status == 429 || status >= 500; }

// POSTs `body` with retries and exponential backoff; returns the response
// body of the first 2xx reply.
std::string post_json(const std::string& url, const std::string& api_key,
                      const std::string& body, int timeout_seconds, int max_attempts) {
  const auto endpoint = split_url(url);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, max_attempts); ++attempt) {
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(timeout_seconds);
    client.set_read_timeout(timeout_seconds);
    client.set_write_timeout(timeout_seconds);
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res && !transient(res->status)) {
      throw Error(ErrorKind::kBackendUnavailable,
                  url + " returned HTTP " + std::to_string(res->status) + ": " +
                      res->body.substr(0, 300));
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    spdlog::warn("{} attempt {}/{} failed: {}", url, attempt, max_attempts, last_error);
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(500LL << attempt));
    }
  }
  throw Error(ErrorKind::kBackendUnavailable, url + " unavailable: " + last_error);
}

}  // namespace

OpenAiChatBackend::OpenAiChatBackend(OpenAiChatConfig config) : config_(std::move(config)) {
  if (config_.model.empty()) throw Error(ErrorKind::kConfigError, "LLM backend needs a model");
}

std::string OpenAiChatBackend::complete(const LlmRequest& request) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array();
  if (!request.system.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", request.user}});
  body["temperature"] = request.params.temperature;
  if (request.params.max_tokens > 0) body["max_tokens"] = request.params.max_tokens;

  std::string base = config_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  const auto reply = post_json(base + "/chat/completions", config_.api_key, body.dump(),
                               config_.timeout_seconds, config_.max_attempts);
  try {
    auto parsed = nlohmann::json::parse(reply);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                std::string("unexpected chat completion payload: ") + e.what());
  }
}

HttpSearchBackend::HttpSearchBackend(HttpSearchConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw Error(ErrorKind::kConfigError, "search backend needs an endpoint");
  }
}

std::vector<Passage> HttpSearchBackend::search(const std::string& query) {
  nlohmann::json body;
  body[config_.query_field] = query;
  if (!config_.count_field.empty()) body[config_.count_field] = config_.max_results;
  const auto reply = post_json(config_.endpoint, config_.api_key, body.dump(),
                               config_.timeout_seconds, config_.max_attempts);
  try {
    auto parsed = nlohmann::json::parse(reply);
    std::vector<Passage> out;
    for (const auto& r : parsed.at(config_.results_key)) {
      Passage p;
      p.text = r.at(config_.text_key).get<std::string>();
      if (r.contains(config_.source_key) && r[config_.source_key].is_string()) {
        p.source = r[config_.source_key].get<std::string>();
      }
      out.push_back(std::move(p));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kBackendUnavailable,
                std::string("unexpected search payload: ") + e.what());
  }
}

}  // namespace halspan
