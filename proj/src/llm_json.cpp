#include "halspan/llm_json.hpp"

#include "halspan/error.hpp"
#include "halspan/prompts.hpp"

namespace halspan {

namespace {

std::optional<nlohmann::json> try_parse(std::string_view text) {
  auto v = nlohmann::json::parse(text, nullptr, false);
  if (v.is_discarded()) return std::nullopt;
  return v;
}

// End (exclusive) of the bracketed value starting at text[start], or npos.
std::size_t matching_close(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<nlohmann::json> extract_json(std::string_view reply) {
  if (auto whole = try_parse(reply)) return whole;

  const auto fence = reply.find("```json");
  if (fence != std::string_view::npos) {
    const auto body = fence + 7;
    const auto close = reply.find("```", body);
    if (close != std::string_view::npos) {
      if (auto fenced = try_parse(reply.substr(body, close - body))) return fenced;
    }
  }

  // A bare member such as `"incorrect_spans": []`, possibly after some
  // prose; tried before the bracket scan, which would pick up the inner value.
  const auto first = reply.find('"');
  const auto last = reply.find_last_of("]}");
  const auto colon = reply.find(':', first == std::string_view::npos ? 0 : first);
  const auto bracket = reply.find_first_of("{[");
  if (first != std::string_view::npos && last != std::string_view::npos && first < last &&
      first < bracket && colon < bracket) {
    std::string wrapped = "{";
    wrapped += reply.substr(first, last + 1 - first);
    wrapped += "}";
    if (auto v = try_parse(wrapped)) return v;
  }

  for (std::size_t i = 0; i < reply.size(); ++i) {
    if (reply[i] != '{' && reply[i] != '[') continue;
    const auto end = matching_close(reply, i);
    if (end == std::string_view::npos) continue;
    if (auto v = try_parse(reply.substr(i, end - i))) return v;
  }

  return std::nullopt;
}

JsonReply complete_json(LlmBackend& llm, const LlmRequest& request, std::string_view schema,
                        const std::function<void(const nlohmann::json&)>& check) {
  JsonReply out;
  auto attempt = [&](const std::string& reply) -> bool {
    auto parsed = extract_json(reply);
    if (!parsed) return false;
    try {
      check(*parsed);
    } catch (const std::exception&) {
      return false;
    }
    out.value = std::move(*parsed);
    return true;
  };

  out.raw_outputs.push_back(llm.complete(request));
  if (attempt(out.raw_outputs.back())) return out;

  LlmRequest repair;
  repair.params = request.params;
  repair.user = render(prompts::get("json_repair").text,
                       {{"schema", std::string(schema)}, {"output", out.raw_outputs.back()}});
  out.retries = 1;
  out.raw_outputs.push_back(llm.complete(repair));
  if (attempt(out.raw_outputs.back())) return out;

  throw LlmOutputError(ErrorKind::kLlmParseError,
                       "model output is not valid JSON for the expected schema after one repair",
                       std::move(out.raw_outputs));
}

}  // namespace halspan
