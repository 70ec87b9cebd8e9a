#include "halspan/mapping.hpp"

#include "halspan/error.hpp"
#include "halspan/llm_json.hpp"
#include "halspan/prompts.hpp"
#include "halspan/utf8.hpp"

namespace halspan {

std::vector<Token> tokenize(std::u32string_view text, TokenMode mode) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (utf8::is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (mode == TokenMode::kWord) {
      while (j < text.size() && !utf8::is_space(text[j])) ++j;
    }
    tokens.push_back({std::u32string(text.substr(i, j - i)), CharSpan(i, j)});
    i = j;
  }
  return tokens;
}

TokenMode choose_token_mode(std::u32string_view original, std::u32string_view corrected,
                            const TokenizeOptions& options) {
  auto mean_length = [](std::u32string_view text) {
    std::size_t chars = 0;
    std::size_t tokens = 0;
    bool in_token = false;
    for (char32_t c : text) {
      if (utf8::is_space(c)) {
        in_token = false;
      } else {
        ++chars;
        if (!in_token) ++tokens;
        in_token = true;
      }
    }
    return tokens == 0 ? 0.0 : static_cast<double>(chars) / static_cast<double>(tokens);
  };
  const double longest = std::max(mean_length(original), mean_length(corrected));
  return longest > options.max_mean_token_chars ? TokenMode::kCharacter : TokenMode::kWord;
}

WordAlignment align_words(std::string_view original, std::string_view corrected,
                          const TokenizeOptions& options) {
  const auto a = utf8::decode(original);
  const auto b = utf8::decode(corrected);
  WordAlignment out;
  out.mode = choose_token_mode(a, b, options);
  for (auto& t : tokenize(a, out.mode)) {
    out.token_spans.push_back(t.span);
    out.original_tokens.push_back(std::move(t.text));
  }
  for (auto& t : tokenize(b, out.mode)) out.corrected_tokens.push_back(std::move(t.text));
  out.alignment = align_sequences<std::u32string>(out.original_tokens, out.corrected_tokens);
  return out;
}

SpanSet map_edit_distance(std::string_view original, std::string_view corrected,
                          const TokenizeOptions& options) {
  const auto aligned = align_words(original, corrected, options);
  std::vector<bool> flagged(aligned.token_spans.size(), false);
  for (const auto& step : aligned.alignment.steps) {
    if (step.op == EditOp::kDelete || step.op == EditOp::kSubstitute) {
      flagged[*step.original] = true;
    }
  }
  std::vector<CharSpan> spans;
  std::size_t k = 0;
  while (k < flagged.size()) {
    if (!flagged[k]) {
      ++k;
      continue;
    }
    std::size_t last = k;
    while (last + 1 < flagged.size() && flagged[last + 1]) ++last;
    spans.emplace_back(aligned.token_spans[k].start(), aligned.token_spans[last].end());
    k = last + 1;
  }
  return SpanSet::normalize(std::move(spans), utf8::length(original));
}

SpanMapping map_substring(std::string_view answer, std::span<const Extraction> extracted) {
  const auto text = utf8::decode(answer);
  SpanMapping out;
  std::vector<CharSpan> hard;
  std::size_t cursor = 0;
  for (const auto& e : extracted) {
    const auto needle = utf8::decode(e.text);
    if (needle.empty()) {
      out.warnings.push_back("UnmatchedText: empty extraction");
      continue;
    }
    const auto pos = text.find(needle, cursor);
    if (pos == std::u32string::npos) {
      out.warnings.push_back("UnmatchedText: '" + e.text + "' not found after offset " +
                             std::to_string(cursor));
      continue;
    }
    CharSpan span(pos, pos + needle.size());
    hard.push_back(span);
    if (e.probability > 0.0) out.soft.emplace_back(span, e.probability);
    cursor = span.end();
  }
  out.hard = SpanSet::normalize(std::move(hard), text.size());
  return out;
}

SpanMapping map_facts_to_spans(std::string_view answer, std::span<const std::string> facts,
                               LlmBackend& llm, const DecodingParams& params,
                               std::vector<std::string>* raw_outputs) {
  if (facts.empty()) throw Error(ErrorKind::kPrecondition, "no facts to map");
  std::string listing;
  for (const auto& f : facts) listing += "- " + f + "\n";
  LlmRequest request;
  request.user = render(prompts::get("fact_to_span").text,
                        {{"answer", std::string(answer)}, {"facts", listing}});
  request.params = params;
  auto reply = complete_json(
      llm, request, R"({"excerpts": [{"fact": "...", "excerpt": "<verbatim answer text>"}]})",
      [](const nlohmann::json& v) {
        if (!v.is_object() || !v.contains("excerpts") || !v["excerpts"].is_array()) {
          throw Error(ErrorKind::kLlmParseError, "reply lacks an excerpts array");
        }
        for (const auto& e : v["excerpts"]) {
          if (!e.is_object() || !e.contains("excerpt") || !e["excerpt"].is_string()) {
            throw Error(ErrorKind::kLlmParseError, "excerpt entry lacks a string excerpt");
          }
        }
      });
  if (raw_outputs) {
    raw_outputs->insert(raw_outputs->end(), reply.raw_outputs.begin(), reply.raw_outputs.end());
  }

  const auto text = utf8::decode(answer);
  SpanMapping out;
  std::vector<CharSpan> hard;
  for (const auto& e : reply.value["excerpts"]) {
    const auto excerpt = e["excerpt"].get<std::string>();
    const auto needle = utf8::decode(excerpt);
    const auto pos = needle.empty() ? std::u32string::npos : text.find(needle);
    if (pos == std::u32string::npos) {
      out.warnings.push_back("UnmatchedText: excerpt '" + excerpt + "' is not in the answer");
      continue;
    }
    hard.emplace_back(pos, pos + needle.size());
  }
  out.hard = SpanSet::normalize(std::move(hard), text.size());
  for (const auto& s : out.hard.spans()) out.soft.emplace_back(s, 1.0);
  return out;
}

}  // namespace halspan
