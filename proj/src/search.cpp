#include "halspan/search.hpp"

#include "halspan/error.hpp"
#include "halspan/hashing.hpp"
#include "halspan/io.hpp"
#include "halspan/prompts.hpp"

namespace halspan {

FixtureSearchBackend::FixtureSearchBackend(std::filesystem::path fixture_dir, std::string name)
    : dir_(std::move(fixture_dir)), name_(std::move(name)) {}

std::vector<Passage> FixtureSearchBackend::search(const std::string& query) {
  ++calls_;
  const auto path = dir_ / (sha256_hex(query) + ".json");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kFixtureMissing, "no search fixture for query: " + query);
  }
  try {
    auto fixture = nlohmann::json::parse(io::read_file(path));
    std::vector<Passage> out;
    for (const auto& p : fixture.at("passages")) {
      out.push_back({p.at("source").get<std::string>(), p.at("text").get<std::string>()});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, "bad search fixture " + path.string() + ": " + e.what());
  }
}

std::filesystem::path FixtureSearchBackend::write_fixture(const std::filesystem::path& dir,
                                                          const std::string& query,
                                                          const std::vector<Passage>& passages) {
  nlohmann::ordered_json o;
  o["query"] = query;
  o["passages"] = nlohmann::ordered_json::array();
  for (const auto& p : passages) {
    o["passages"].push_back({{"source", p.source}, {"text", p.text}});
  }
  const auto path = dir / (sha256_hex(query) + ".json");
  io::atomic_write(path, o.dump(2) + "\n");
  return path;
}

std::vector<Passage> ChatSearchBackend::search(const std::string& query) {
  LlmRequest request;
  request.system = std::string(prompts::get("chat_search").text);
  request.user = query;
  std::string text = llm_.complete(request);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  return {{llm_.identity().describe(), std::move(text)}};
}

BackendIdentity ChatSearchBackend::identity() const {
  auto inner = llm_.identity();
  return {"chat-search", inner.describe()};
}

}  // namespace halspan
