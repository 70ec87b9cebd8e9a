#include "halspan/retrieval.hpp"

#include <unordered_set>

#include "halspan/error.hpp"
#include "halspan/llm_json.hpp"
#include "halspan/prompts.hpp"
#include "halspan/utf8.hpp"

namespace halspan {

std::string_view to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::kNone: return "none";
    case ContextMode::kFromQuestion: return "from_question";
    case ContextMode::kFromClaims: return "from_claims";
  }
  return "none";
}

ContextMode parse_context_mode(std::string_view name) {
  if (name == "none") return ContextMode::kNone;
  if (name == "from_question") return ContextMode::kFromQuestion;
  if (name == "from_claims") return ContextMode::kFromClaims;
  throw Error(ErrorKind::kConfigError, "unknown context mode '" + std::string(name) + "'");
}

std::string ContextBundle::text() const {
  std::string out;
  for (const auto& p : passages) {
    if (!out.empty()) out += "\n\n";
    out += p.text;
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<Passage> run_query(SearchBackend& search, const std::string& query,
                               const RetrievalOptions& options) {
  auto passages = search.search(query);
  if (options.max_passages > 0 && passages.size() > options.max_passages) {
    passages.resize(options.max_passages);
  }
  if (options.max_passage_chars > 0) {
    for (auto& p : passages) {
      if (utf8::length(p.text) > options.max_passage_chars) {
        p.text = utf8::slice(p.text, 0, options.max_passage_chars);
      }
    }
  }
  return passages;
}

std::string maybe_translate(const std::string& text, LlmBackend* translator,
                            const RetrievalOptions& options, const DecodingParams& params) {
  if (!options.translate) return text;
  if (!translator) {
    throw Error(ErrorKind::kConfigError, "translation requested without a translation backend");
  }
  return translate_to_english(text, *translator, params);
}

}  // namespace

std::string translate_to_english(const std::string& text, LlmBackend& llm,
                                 const DecodingParams& params) {
  LlmRequest request;
  request.user = render(prompts::get("translation").text, {{"text", text}});
  request.params = params;
  auto translated = trim(llm.complete(request));
  if (translated.empty()) {
    throw LlmOutputError(ErrorKind::kLlmParseError, "empty translation", {translated});
  }
  return translated;
}

std::vector<std::string> extract_claims(const Instance& inst, LlmBackend& llm,
                                        const DecodingParams& params) {
  if (inst.answer.empty()) throw Error(ErrorKind::kEmptyText, "answer of '" + inst.id + "' is empty");
  LlmRequest request;
  request.user = render(prompts::get("claim_extraction").text,
                        {{"question", inst.question}, {"answer", inst.answer}});
  request.params = params;
  auto reply = complete_json(llm, request, R"(["claim", "..."])", [](const nlohmann::json& v) {
    if (!v.is_array()) throw Error(ErrorKind::kLlmParseError, "claims are not an array");
    for (const auto& c : v) {
      if (!c.is_string()) throw Error(ErrorKind::kLlmParseError, "claim is not a string");
    }
  });
  std::vector<std::string> claims;
  for (const auto& c : reply.value) {
    auto claim = trim(c.get<std::string>());
    if (!claim.empty()) claims.push_back(std::move(claim));
  }
  return claims;
}

ContextBundle context_from_question(const Instance& inst, SearchBackend& search,
                                    LlmBackend* translator, const RetrievalOptions& options,
                                    const DecodingParams& params) {
  if (inst.question.empty()) {
    throw Error(ErrorKind::kEmptyText, "question of '" + inst.id + "' is empty");
  }
  ContextBundle bundle;
  bundle.instance_id = inst.id;
  bundle.mode = ContextMode::kFromQuestion;
  bundle.translated = options.translate;
  bundle.queries.push_back(maybe_translate(inst.question, translator, options, params));
  bundle.passages = run_query(search, bundle.queries.front(), options);
  if (bundle.passages.empty()) {
    throw Error(ErrorKind::kEmptyResult, "search returned no passages for '" + inst.id + "'");
  }
  return bundle;
}

ContextBundle context_from_claims(const Instance& inst, SearchBackend& search, LlmBackend& llm,
                                  LlmBackend* translator, const RetrievalOptions& options,
                                  const DecodingParams& params) {
  const auto claims = extract_claims(inst, llm, params);
  if (claims.empty()) return context_from_question(inst, search, translator, options, params);

  ContextBundle bundle;
  bundle.instance_id = inst.id;
  bundle.mode = ContextMode::kFromClaims;
  bundle.translated = options.translate;
  std::unordered_set<std::string> seen;
  for (const auto& claim : claims) {
    bundle.queries.push_back(maybe_translate(claim, translator, options, params));
    for (auto& p : run_query(search, bundle.queries.back(), options)) {
      if (seen.insert(p.text).second) bundle.passages.push_back(std::move(p));
    }
  }
  if (bundle.passages.empty()) {
    throw Error(ErrorKind::kEmptyResult, "search returned no passages for '" + inst.id + "'");
  }
  return bundle;
}

}  // namespace halspan
