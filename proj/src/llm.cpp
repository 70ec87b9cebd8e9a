#include "halspan/llm.hpp"

#include "halspan/error.hpp"
#include "halspan/hashing.hpp"
#include "halspan/io.hpp"

namespace halspan {

nlohmann::ordered_json to_json(const LlmRequest& request) {
  nlohmann::ordered_json o;
  o["system"] = request.system;
  o["user"] = request.user;
  o["temperature"] = request.params.temperature;
  o["max_tokens"] = request.params.max_tokens;
  return o;
}

std::string request_key(const BackendIdentity& backend, const LlmRequest& request) {
  nlohmann::ordered_json o;
  o["provider"] = backend.provider;
  o["model"] = backend.model;
  o["request"] = to_json(request);
  return sha256_hex(o.dump());
}

MockLlmBackend::MockLlmBackend(std::filesystem::path fixture_dir, std::string model)
    : dir_(std::move(fixture_dir)), model_(std::move(model)) {}

std::string MockLlmBackend::complete(const LlmRequest& request) {
  ++calls_;
  const auto key = request_key(identity(), request);
  const auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) {
    std::string preview = request.user.substr(0, 120);
    throw Error(ErrorKind::kFixtureMissing,
                "no canned response " + key + " in " + dir_.string() + " for request: " + preview);
  }
  try {
    auto fixture = nlohmann::json::parse(io::read_file(path));
    return fixture.at("response").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, "bad fixture " + path.string() + ": " + e.what());
  }
}

std::filesystem::path MockLlmBackend::write_fixture(const std::filesystem::path& dir,
                                                    const BackendIdentity& backend,
                                                    const LlmRequest& request,
                                                    std::string_view response) {
  nlohmann::ordered_json o;
  o["request"] = to_json(request);
  o["response"] = std::string(response);
  const auto path = dir / (request_key(backend, request) + ".json");
  io::atomic_write(path, o.dump(2) + "\n");
  return path;
}

}  // namespace halspan
