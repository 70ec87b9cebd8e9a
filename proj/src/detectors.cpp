#include "halspan/detectors.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include <spdlog/spdlog.h>

#include "halspan/error.hpp"
#include "halspan/llm_json.hpp"
#include "halspan/prompts.hpp"

namespace halspan {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kDirect: return "direct";
    case DetectorKind::kKnowledgeGraph: return "kg";
    case DetectorKind::kMinRevision: return "min_revision";
  }
  return "direct";
}

DetectorKind parse_detector_kind(std::string_view name) {
  if (name == "direct") return DetectorKind::kDirect;
  if (name == "kg") return DetectorKind::kKnowledgeGraph;
  if (name == "min_revision") return DetectorKind::kMinRevision;
  throw Error(ErrorKind::kConfigError, "unknown detector '" + std::string(name) + "'");
}

namespace {

constexpr std::string_view kSpansSchema =
    R"({"incorrect_spans": [{"text": "<verbatim span of the answer>", "probability": <number between 0 and 1>}]})";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double probability_of(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return std::stod(v.get<std::string>());
  throw Error(ErrorKind::kLlmParseError, "probability is not a number");
}

void check_spans(const nlohmann::json& v) {
  if (!v.is_object() || !v.contains("incorrect_spans") || !v["incorrect_spans"].is_array()) {
    throw Error(ErrorKind::kLlmParseError, "reply lacks an incorrect_spans array");
  }
  for (const auto& item : v["incorrect_spans"]) {
    if (!item.is_object() || !item.contains("text") || !item["text"].is_string()) {
      throw Error(ErrorKind::kLlmParseError, "incorrect_spans entry lacks a text");
    }
    if (item.contains("probability")) probability_of(item["probability"]);
  }
}

std::string demo_output(const Demo& demo) {
  nlohmann::ordered_json spans = nlohmann::ordered_json::array();
  for (const auto& t : demo.span_texts) spans.push_back({{"text", t}, {"probability", 1.0}});
  nlohmann::ordered_json o;
  o["incorrect_spans"] = std::move(spans);
  return o.dump(2);
}

}  // namespace

ExtractionPrompt ExtractionPrompt::defaults(bool with_context) {
  const auto& tmpl = prompts::get(with_context ? "text_extraction" : "context_free_extraction");
  return {render(tmpl.text, {}), {}};
}

std::string ExtractionPrompt::system_prompt() const {
  if (demos.empty()) return instruction;
  std::string out = instruction;
  out += "\n\n# Additional Demonstrations\n";
  const auto& tmpl = prompts::get("few_shot_demo").text;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    out += "\n";
    out += render(tmpl, {{"index", std::to_string(i + 1)},
                         {"question", demos[i].question},
                         {"answer", demos[i].answer},
                         {"output", demo_output(demos[i])}});
    out += "\n";
  }
  return out;
}

LlmRequest direct_request(const ContextBundle* context, const Instance& inst,
                          const ExtractionPrompt& prompt, const DecodingParams& params) {
  LlmRequest request;
  request.system = prompt.system_prompt();
  request.params = params;
  if (context) {
    request.user = render(prompts::get("text_extraction_input").text,
                          {{"context", context->text()},
                           {"question", inst.question},
                           {"answer", inst.answer}});
  } else {
    request.user = render(prompts::get("context_free_input").text,
                          {{"question", inst.question}, {"answer", inst.answer}});
  }
  return request;
}

Detection detect_direct(const ContextBundle* context, const Instance& inst, LlmBackend& llm,
                        const ExtractionPrompt* prompt, const DecodingParams& params) {
  if (inst.answer.empty()) throw Error(ErrorKind::kEmptyText, "answer of '" + inst.id + "' is empty");
  const auto fallback = ExtractionPrompt::defaults(context != nullptr);
  const auto request = direct_request(context, inst, prompt ? *prompt : fallback, params);
  auto reply = complete_json(llm, request, kSpansSchema, check_spans);

  Detection detection;
  detection.detector = DetectorKind::kDirect;
  detection.raw_outputs = std::move(reply.raw_outputs);
  detection.retries = reply.retries;
  ExtractedSpans spans;
  for (const auto& item : reply.value["incorrect_spans"]) {
    Extraction e;
    e.text = item["text"].get<std::string>();
    if (e.text.empty()) {
      detection.warnings.push_back("skipped empty extracted span");
      continue;
    }
    e.probability = item.contains("probability") ? probability_of(item["probability"]) : 1.0;
    if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
      const double clamped = e.probability > 1.0 ? 1.0 : 0.0;
      spdlog::warn("{}: clamped probability {} of '{}' to {}", inst.id, e.probability, e.text,
                   clamped);
      detection.warnings.push_back("clamped probability of '" + e.text + "'");
      e.probability = clamped;
    }
    spans.items.push_back(std::move(e));
  }
  detection.result = std::move(spans);
  return detection;
}

std::vector<const Triple*> KnowledgeGraph::mentioning(std::string_view text) const {
  const auto haystack = lower_ascii(text);
  auto named = [&](const std::string& entity) {
    return !entity.empty() && haystack.find(lower_ascii(entity)) != std::string::npos;
  };
  std::vector<const Triple*> out;
  for (const auto& t : triples) {
    if (named(t.subject) || named(t.object)) out.push_back(&t);
  }
  return out;
}

KnowledgeGraph build_kg(const ContextBundle& context, LlmBackend& llm,
                        const DecodingParams& params, std::vector<std::string>* raw_outputs) {
  if (context.passages.empty()) {
    throw Error(ErrorKind::kPrecondition, "cannot build a knowledge graph without passages");
  }
  KnowledgeGraph graph;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < context.passages.size(); ++i) {
    LlmRequest request;
    request.user =
        render(prompts::get("kg_triples").text, {{"passage", context.passages[i].text}});
    request.params = params;
    auto reply = complete_json(
        llm, request, R"({"triples": [{"subject": "...", "relation": "...", "object": "..."}]})",
        [](const nlohmann::json& v) {
          if (!v.is_object() || !v.contains("triples") || !v["triples"].is_array()) {
            throw Error(ErrorKind::kLlmParseError, "reply lacks a triples array");
          }
          for (const auto& t : v["triples"]) {
            for (const char* key : {"subject", "relation", "object"}) {
              if (!t.is_object() || !t.contains(key) || !t[key].is_string()) {
                throw Error(ErrorKind::kLlmParseError, "triple lacks a string " + std::string(key));
              }
            }
          }
        });
    if (raw_outputs) {
      raw_outputs->insert(raw_outputs->end(), reply.raw_outputs.begin(), reply.raw_outputs.end());
    }
    for (const auto& t : reply.value["triples"]) {
      Triple triple{trim(t["subject"].get<std::string>()), trim(t["relation"].get<std::string>()),
                    trim(t["object"].get<std::string>()), i};
      if (seen.emplace(triple.subject, triple.relation, triple.object).second) {
        graph.triples.push_back(std::move(triple));
      }
    }
  }
  return graph;
}

Detection detect_kg(const ContextBundle* context, const Instance& inst, LlmBackend& llm,
                    const DecodingParams& params) {
  Detection detection;
  detection.detector = DetectorKind::kKnowledgeGraph;
  KnowledgeGraph graph;
  if (context && !context->passages.empty()) {
    graph = build_kg(*context, llm, params, &detection.raw_outputs);
  }
  FalseFacts result;
  for (const auto& fact : extract_claims(inst, llm, params)) {
    const auto relevant = graph.mentioning(fact);
    if (relevant.empty()) {
      detection.warnings.push_back("no graph entity for fact: " + fact);
      result.facts.push_back(fact);
      continue;
    }
    std::string listing;
    for (const auto* t : relevant) {
      listing += "(" + t->subject + ", " + t->relation + ", " + t->object + ")\n";
    }
    LlmRequest request;
    request.user = render(prompts::get("kg_verify").text, {{"fact", fact}, {"triples", listing}});
    request.params = params;
    auto reply = complete_json(
        llm, request, R"({"verdict": "supported" | "contradicted" | "unsupported"})",
        [](const nlohmann::json& v) {
          if (!v.is_object() || !v.contains("verdict") || !v["verdict"].is_string()) {
            throw Error(ErrorKind::kLlmParseError, "reply lacks a verdict");
          }
          const auto verdict = v["verdict"].get<std::string>();
          if (verdict != "supported" && verdict != "contradicted" && verdict != "unsupported") {
            throw Error(ErrorKind::kLlmParseError, "unknown verdict " + verdict);
          }
        });
    detection.raw_outputs.insert(detection.raw_outputs.end(), reply.raw_outputs.begin(),
                                 reply.raw_outputs.end());
    detection.retries += reply.retries;
    if (reply.value["verdict"].get<std::string>() != "supported") result.facts.push_back(fact);
  }
  detection.result = std::move(result);
  return detection;
}

LlmRequest min_revision_request(const ContextBundle* context, const Instance& inst,
                                const DecodingParams& params) {
  LlmRequest request;
  request.user = render(prompts::get("min_revision").text,
                        {{"context", context ? context->text() : std::string()},
                         {"question", inst.question},
                         {"answer", inst.answer}});
  request.params = params;
  return request;
}

namespace {

std::optional<std::string> corrected_text(const std::string& reply) {
  static constexpr std::string_view kOpen = "<corrected_answer>";
  static constexpr std::string_view kClose = "</corrected_answer>";
  const auto open = reply.find(kOpen);
  if (open == std::string::npos) return std::nullopt;
  const auto body = open + kOpen.size();
  const auto close = reply.find(kClose, body);
  if (close == std::string::npos) return std::nullopt;
  auto text = trim(std::string_view(reply).substr(body, close - body));
  if (text.empty()) return std::nullopt;
  return text;
}

}  // namespace

Detection detect_min_revision(const ContextBundle* context, const Instance& inst,
                              LlmBackend& llm, const DecodingParams& params) {
  if (inst.answer.empty()) throw Error(ErrorKind::kEmptyText, "answer of '" + inst.id + "' is empty");
  Detection detection;
  detection.detector = DetectorKind::kMinRevision;
  const auto request = min_revision_request(context, inst, params);
  detection.raw_outputs.push_back(llm.complete(request));
  auto corrected = corrected_text(detection.raw_outputs.back());
  if (!corrected) {
    LlmRequest retry;
    retry.params = params;
    retry.user = render(prompts::get("min_revision_retry").text,
                        {{"request", request.user}, {"previous", detection.raw_outputs.back()}});
    detection.retries = 1;
    detection.raw_outputs.push_back(llm.complete(retry));
    corrected = corrected_text(detection.raw_outputs.back());
  }
  if (!corrected) {
    throw LlmOutputError(ErrorKind::kMissingTag,
                         "reply has no <corrected_answer> tags after one retry",
                         std::move(detection.raw_outputs));
  }
  detection.result = CorrectedAnswer{std::move(*corrected)};
  return detection;
}

}  // namespace halspan
