#include "halspan/prompts.hpp"

#include <algorithm>

#include "halspan/error.hpp"
#include "halspan/hashing.hpp"

namespace halspan {

namespace {

constexpr PromptTemplate kPrompts[] = {
#include "halspan/prompt_assets.inc"
};

}  // namespace

std::string PromptTemplate::digest() const { return sha256_hex(text).substr(0, 16); }

namespace prompts {

const PromptTemplate& get(std::string_view name) {
  auto it = std::find_if(std::begin(kPrompts), std::end(kPrompts),
                         [&](const PromptTemplate& p) { return p.name == name; });
  if (it == std::end(kPrompts)) {
    throw Error(ErrorKind::kConfigError, "unknown prompt template '" + std::string(name) + "'");
  }
  return *it;
}

std::span<const PromptTemplate> all() { return kPrompts; }

}  // namespace prompts

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      out.push_back('{');
      i += 2;
    } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
      out.push_back('}');
      i += 2;
    } else if (c == '{') {
      const auto close = tmpl.find('}', i);
      if (close == std::string_view::npos) {
        throw Error(ErrorKind::kConfigError, "unterminated placeholder in template");
      }
      const std::string key(tmpl.substr(i + 1, close - i - 1));
      auto it = vars.find(key);
      if (it == vars.end()) {
        throw Error(ErrorKind::kConfigError, "template placeholder '{" + key + "}' has no value");
      }
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

}  // namespace halspan
