#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

namespace halspan {

/// A versioned prompt asset compiled in from assets/prompts.
struct PromptTemplate {
  std::string_view name;
  std::string_view version;
  std::string_view text;

  /// Short content digest, recorded in run manifests.
  std::string digest() const;
};

namespace prompts {

/// Throws Error(kConfigError) for an unknown name.
const PromptTemplate& get(std::string_view name);
std::span<const PromptTemplate> all();

}  // namespace prompts

/// Substitutes `{name}` placeholders and unescapes `{{` / `}}`. Substituted
/// values are inserted verbatim. An unknown placeholder throws
/// Error(kConfigError).
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace halspan
