#include "halspan/config.hpp"

#include <cstdlib>
#include <fstream>

#include "halspan/error.hpp"
#include "halspan/io.hpp"

namespace halspan {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorKind::kConfigError, message);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(std::string("config field '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

// Resolves "dir" entries of a backend descriptor (and of a nested chat-search
// llm) against the config file's directory.
nlohmann::json resolve_descriptor(nlohmann::json d, const fs::path& base) {
  if (d.is_null()) return d;
  if (!d.is_object()) config_error("backend descriptor must be an object");
  if (!d.contains("type")) config_error("backend descriptor lacks 'type'");
  if (d.contains("dir")) d["dir"] = resolve(base, d["dir"].get<std::string>()).string();
  if (d.contains("llm")) d["llm"] = resolve_descriptor(d["llm"], base);
  return d;
}

bool is_env_reference(const std::string& s) {
  return s.size() > 3 && s.starts_with("${") && s.back() == '}';
}

nlohmann::ordered_json redact(const nlohmann::json& d) {
  if (d.is_null()) return nullptr;
  nlohmann::ordered_json out = nlohmann::ordered_json::parse(d.dump());
  if (out.contains("api_key")) {
    const auto key = out["api_key"].is_string() ? out["api_key"].get<std::string>() : "";
    if (!is_env_reference(key)) out["api_key"] = "<redacted>";
  }
  if (out.contains("llm")) out["llm"] = redact(d.at("llm"));
  return out;
}

std::string require_string(const nlohmann::json& d, const char* key) {
  if (!d.contains(key) || !d.at(key).is_string()) {
    config_error(std::string("backend descriptor lacks string field '") + key + "'");
  }
  return d.at(key).get<std::string>();
}

}  // namespace

std::string_view to_string(MapperKind kind) {
  switch (kind) {
    case MapperKind::kSubstring: return "substring";
    case MapperKind::kFactToSpan: return "fact_to_span";
    case MapperKind::kEditDistance: return "edit_distance";
  }
  return "?";
}

MapperKind parse_mapper_kind(std::string_view name) {
  if (name == "substring") return MapperKind::kSubstring;
  if (name == "fact_to_span") return MapperKind::kFactToSpan;
  if (name == "edit_distance") return MapperKind::kEditDistance;
  config_error("unknown mapper '" + std::string(name) +
               "' (expected substring, fact_to_span or edit_distance)");
}

MapperKind default_mapper(DetectorKind detector) {
  switch (detector) {
    case DetectorKind::kDirect: return MapperKind::kSubstring;
    case DetectorKind::kKnowledgeGraph: return MapperKind::kFactToSpan;
    case DetectorKind::kMinRevision: return MapperKind::kEditDistance;
  }
  return MapperKind::kSubstring;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("config must be a JSON object");
  RunConfig c;
  if (j.contains("languages")) {
    const auto& langs = j.at("languages");
    if (langs.is_string()) {
      c.languages.push_back(langs.get<std::string>());
    } else if (langs.is_array()) {
      for (const auto& l : langs) c.languages.push_back(l.get<std::string>());
    } else {
      config_error("'languages' must be a string or an array");
    }
    for (const auto& l : c.languages) {
      bool known = false;
      for (auto t : task_languages()) known = known || t == l;
      if (!known) config_error("unknown language '" + l + "'");
    }
  }
  c.context_mode = parse_context_mode(get_or<std::string>(j, "context_mode", "from_question"));
  c.detector = parse_detector_kind(get_or<std::string>(j, "detector", "direct"));
  if (j.contains("mapper") && !j.at("mapper").is_null()) {
    c.mapper = parse_mapper_kind(get_or<std::string>(j, "mapper", ""));
  }
  c.search = resolve_descriptor(j.value("search", nlohmann::json()), base_dir);
  c.llm = resolve_descriptor(j.value("llm", nlohmann::json()), base_dir);
  c.translation_llm = resolve_descriptor(j.value("translation_llm", nlohmann::json()), base_dir);
  c.cache_dir = resolve(base_dir, get_or<std::string>(j, "cache_dir", ".halspan-cache"));
  c.output = resolve(base_dir, get_or<std::string>(j, "output", "predictions.jsonl"));
  if (j.contains("prompt") && !j.at("prompt").is_null()) {
    c.prompt_file = resolve(base_dir, get_or<std::string>(j, "prompt", ""));
  }
  const auto parallelism = get_or<long long>(j, "parallelism", 1);
  if (parallelism < 1) config_error("'parallelism' must be at least 1");
  c.parallelism = static_cast<std::size_t>(parallelism);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);

  const auto retrieval = j.value("retrieval", nlohmann::json::object());
  c.retrieval.max_passages = get_or<std::size_t>(retrieval, "max_passages", 5);
  c.retrieval.max_passage_chars = get_or<std::size_t>(retrieval, "max_passage_chars", 0);
  c.retrieval.translate = get_or<bool>(j, "translate", false);

  const auto decoding = j.value("decoding", nlohmann::json::object());
  c.decoding.temperature = get_or<double>(decoding, "temperature", 0.0);
  c.decoding.max_tokens = get_or<int>(decoding, "max_tokens", 0);

  if (j.contains("fields")) c.fields = FieldMap::from_json(j.at("fields"));
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    config_error("config " + file.string() + " is not valid JSON: " + e.what());
  } catch (const Error& e) {
    config_error("cannot read config " + file.string() + ": " + e.detail());
  }
  return from_json(j, file.parent_path());
}

void RunConfig::validate() const {
  const auto m = mapper_kind();
  if (m == MapperKind::kEditDistance && detector != DetectorKind::kMinRevision) {
    config_error("the edit_distance mapper needs the min_revision detector");
  }
  if (detector == DetectorKind::kMinRevision && m != MapperKind::kEditDistance) {
    config_error("the min_revision detector only pairs with the edit_distance mapper");
  }
  if (llm.is_null()) config_error("config lacks an 'llm' backend");
  if (context_mode != ContextMode::kNone && search.is_null()) {
    config_error("context mode '" + std::string(to_string(context_mode)) +
                 "' needs a 'search' backend");
  }
}

nlohmann::ordered_json RunConfig::snapshot() const {
  nlohmann::ordered_json j;
  j["languages"] = languages;
  j["context_mode"] = to_string(context_mode);
  j["translate"] = retrieval.translate;
  j["detector"] = to_string(detector);
  j["mapper"] = to_string(mapper_kind());
  j["search"] = redact(search);
  j["llm"] = redact(llm);
  j["translation_llm"] = redact(translation_llm);
  j["prompt"] = prompt_file ? nlohmann::ordered_json(prompt_file->string()) : nullptr;
  j["seed"] = seed;
  j["retrieval"] = {{"max_passages", retrieval.max_passages},
                    {"max_passage_chars", retrieval.max_passage_chars}};
  j["decoding"] = {{"temperature", decoding.temperature}, {"max_tokens", decoding.max_tokens}};
  j["fields"] = {{"id", fields.id},         {"lang", fields.lang},
                 {"question", fields.question}, {"answer", fields.answer},
                 {"model", fields.model},   {"hard", fields.hard},
                 {"soft", fields.soft},     {"annotators", fields.annotators}};
  return j;
}

std::string resolve_secret(const nlohmann::json& value) {
  if (value.is_null()) return {};
  if (!value.is_string()) config_error("'api_key' must be a string");
  const auto s = value.get<std::string>();
  if (!is_env_reference(s)) return s;
  const auto name = s.substr(2, s.size() - 3);
  const char* env = std::getenv(name.c_str());
  if (!env) config_error("environment variable " + name + " is not set");
  return env;
}

std::unique_ptr<LlmBackend> make_llm_backend(const nlohmann::json& d) {
  const auto type = require_string(d, "type");
  if (type == "mock") {
    return std::make_unique<MockLlmBackend>(require_string(d, "dir"),
                                            get_or<std::string>(d, "model", "mock"));
  }
  if (type == "openai") {
    OpenAiChatConfig c;
    c.provider = get_or<std::string>(d, "provider", c.provider);
    c.base_url = get_or<std::string>(d, "base_url", c.base_url);
    c.model = require_string(d, "model");
    c.api_key = resolve_secret(d.value("api_key", nlohmann::json()));
    c.timeout_seconds = get_or<int>(d, "timeout_seconds", c.timeout_seconds);
    c.max_attempts = get_or<int>(d, "max_attempts", c.max_attempts);
    return std::make_unique<OpenAiChatBackend>(std::move(c));
  }
  config_error("unknown llm backend type '" + type + "' (expected mock or openai)");
}

std::unique_ptr<SearchBackend> make_search_backend(const nlohmann::json& d,
                                                   std::unique_ptr<LlmBackend>* owned_llm) {
  const auto type = require_string(d, "type");
  if (type == "mock") {
    return std::make_unique<FixtureSearchBackend>(require_string(d, "dir"),
                                                  get_or<std::string>(d, "name", "fixture"));
  }
  if (type == "http") {
    HttpSearchConfig c;
    c.name = get_or<std::string>(d, "name", c.name);
    c.endpoint = require_string(d, "endpoint");
    c.api_key = resolve_secret(d.value("api_key", nlohmann::json()));
    c.query_field = get_or<std::string>(d, "query_field", c.query_field);
    c.count_field = get_or<std::string>(d, "count_field", c.count_field);
    c.results_key = get_or<std::string>(d, "results_key", c.results_key);
    c.text_key = get_or<std::string>(d, "text_key", c.text_key);
    c.source_key = get_or<std::string>(d, "source_key", c.source_key);
    c.max_results = get_or<int>(d, "max_results", c.max_results);
    c.timeout_seconds = get_or<int>(d, "timeout_seconds", c.timeout_seconds);
    c.max_attempts = get_or<int>(d, "max_attempts", c.max_attempts);
    return std::make_unique<HttpSearchBackend>(std::move(c));
  }
  if (type == "chat") {
    if (!d.contains("llm")) config_error("chat search needs a nested 'llm' descriptor");
    *owned_llm = make_llm_backend(d.at("llm"));
    return std::make_unique<ChatSearchBackend>(**owned_llm);
  }
  config_error("unknown search backend type '" + type + "' (expected mock, http or chat)");
}

BackendSet::BackendSet(const RunConfig& config) {
  config.validate();
  cache_ = std::make_unique<ResponseCache>(config.cache_dir);
  llm_ = make_llm_backend(config.llm);
  cached_llm_ = std::make_unique<CachedLlmBackend>(*llm_, *cache_);
  if (config.retrieval.translate) {
    if (config.translation_llm.is_null()) {
      cached_translator_ = std::make_unique<CachedLlmBackend>(*llm_, *cache_);
    } else {
      translator_ = make_llm_backend(config.translation_llm);
      cached_translator_ = std::make_unique<CachedLlmBackend>(*translator_, *cache_);
    }
  }
  if (config.context_mode != ContextMode::kNone) {
    search_ = make_search_backend(config.search, &search_llm_);
    cached_search_ = std::make_unique<CachedSearchBackend>(*search_, *cache_);
  }
}

BackendSet::~BackendSet() = default;

nlohmann::ordered_json BackendSet::identities() const {
  nlohmann::ordered_json j;
  j["llm"] = cached_llm_->identity().describe();
  j["search"] = cached_search_ ? nlohmann::ordered_json(cached_search_->identity().describe())
                               : nullptr;
  j["translation"] = cached_translator_
                         ? nlohmann::ordered_json(cached_translator_->identity().describe())
                         : nullptr;
  return j;
}

nlohmann::ordered_json to_json(const ExtractionPrompt& prompt) {
  nlohmann::ordered_json j;
  j["instruction"] = prompt.instruction;
  j["demos"] = nlohmann::ordered_json::array();
  for (const auto& d : prompt.demos) {
    j["demos"].push_back({{"instance_id", d.instance_id},
                          {"question", d.question},
                          {"answer", d.answer},
                          {"context_digest", d.context_digest},
                          {"span_texts", d.span_texts}});
  }
  return j;
}

ExtractionPrompt prompt_from_json(const nlohmann::json& j) {
  ExtractionPrompt p;
  try {
    p.instruction = j.at("instruction").get<std::string>();
    for (const auto& d : j.value("demos", nlohmann::json::array())) {
      p.demos.push_back({d.value("instance_id", ""), d.at("question").get<std::string>(),
                         d.at("answer").get<std::string>(), d.value("context_digest", ""),
                         d.value("span_texts", std::vector<std::string>{})});
    }
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("malformed prompt asset: ") + e.what());
  }
  return p;
}

ExtractionPrompt load_prompt_asset(const fs::path& path) {
  try {
    return prompt_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    config_error("prompt asset " + path.string() + " is not valid JSON: " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfigError) throw;
    config_error("cannot read prompt asset " + path.string() + ": " + e.detail());
  }
}

}  // namespace halspan
