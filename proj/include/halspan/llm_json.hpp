#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "halspan/llm.hpp"

namespace halspan {

/// Locates the JSON value in a model reply: the whole reply, a fenced
/// ```json block, or the first balanced {...} / [...] that parses.
std::optional<nlohmann::json> extract_json(std::string_view reply);

struct JsonReply {
  nlohmann::json value;
  std::vector<std::string> raw_outputs;
  int retries = 0;
};

/// Sends `request` and parses the reply, validating it with `check` (which
/// throws on a shape mismatch). A failure triggers exactly one repair
/// re-prompt carrying the malformed output and `schema`; a second failure
/// throws LlmOutputError(kLlmParseError) with both raw replies.
JsonReply complete_json(LlmBackend& llm, const LlmRequest& request, std::string_view schema,
                        const std::function<void(const nlohmann::json&)>& check);

}  // namespace halspan
