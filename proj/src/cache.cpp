#include "halspan/cache.hpp"

#include <chrono>
#include <ctime>

#include <spdlog/spdlog.h>

#include "halspan/error.hpp"
#include "halspan/hashing.hpp"
#include "halspan/io.hpp"

namespace halspan {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create cache dir " + dir_.string());
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  const auto path = entry_path(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto entry = nlohmann::json::parse(io::read_file(path));
    if (entry.at("key").get<std::string>() != key) {
      throw Error(ErrorKind::kCacheCorrupt, "key mismatch");
    }
    return entry.at("payload").get<std::string>();
  } catch (const std::exception& e) {
    spdlog::warn("ignoring corrupt cache entry {}: {}", path.string(), e.what());
    std::lock_guard lock(mutex_);
    ++stats_.corrupt;
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const nlohmann::ordered_json& meta,
                        const std::string& payload) {
  nlohmann::ordered_json entry;
  entry["key"] = key;
  entry["created_at"] = utc_timestamp();
  entry["backend"] = meta;
  entry["payload"] = payload;
  io::atomic_write(entry_path(key), entry.dump(2) + "\n");
}

std::string ResponseCache::get_or_compute(const std::string& key,
                                          const nlohmann::ordered_json& meta,
                                          const std::function<std::string()>& compute) {
  std::promise<std::string> promise;
  std::shared_future<std::string> shared;
  bool leader = false;
  {
    std::lock_guard lock(mutex_);
    auto it = in_flight_.find(key);
    if (it != in_flight_.end()) {
      shared = it->second;
    } else {
      leader = true;
      shared = promise.get_future().share();
      in_flight_.emplace(key, shared);
    }
  }
  if (!leader) {
    std::string value = shared.get();
    std::lock_guard lock(mutex_);
    ++stats_.hits;
    return value;
  }

  auto finish = [&] {
    std::lock_guard lock(mutex_);
    in_flight_.erase(key);
  };
  try {
    std::string value;
    if (auto cached = get(key)) {
      value = std::move(*cached);
      std::lock_guard lock(mutex_);
      ++stats_.hits;
    } else {
      {
        std::lock_guard lock(mutex_);
        ++stats_.misses;
      }
      value = compute();
      put(key, meta, value);
    }
    promise.set_value(value);
    finish();
    return value;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

CacheStats ResponseCache::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t ResponseCache::entry_count() const {
  std::size_t n = 0;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir_, ec)) {
    if (e.path().extension() == ".json") ++n;
  }
  return n;
}

void ResponseCache::clear() {
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir_, ec)) {
    if (e.path().extension() == ".json") std::filesystem::remove(e.path(), ec);
  }
  std::lock_guard lock(mutex_);
  stats_ = {};
}

std::string CachedLlmBackend::complete(const LlmRequest& request) {
  const auto id = inner_.identity();
  nlohmann::ordered_json meta;
  meta["kind"] = "llm";
  meta["provider"] = id.provider;
  meta["model"] = id.model;
  meta["request"] = to_json(request);
  return cache_.get_or_compute(request_key(id, request), meta,
                               [&] { return inner_.complete(request); });
}

std::vector<Passage> CachedSearchBackend::search(const std::string& query) {
  const auto id = inner_.identity();
  nlohmann::ordered_json meta;
  meta["kind"] = "search";
  meta["provider"] = id.provider;
  meta["model"] = id.model;
  meta["query"] = query;
  const auto key = sha256_hex(meta.dump());
  const std::string payload = cache_.get_or_compute(key, meta, [&] {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : inner_.search(query)) {
      arr.push_back({{"source", p.source}, {"text", p.text}});
    }
    return arr.dump();
  });
  try {
    std::vector<Passage> out;
    for (const auto& p : nlohmann::json::parse(payload)) {
      out.push_back({p.at("source").get<std::string>(), p.at("text").get<std::string>()});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kCacheCorrupt, std::string("cached search payload: ") + e.what());
  }
}

}  // namespace halspan
