#pragma once

#include <cstddef>
#include <string>
#include <string_view>

// Character offsets throughout the library count Unicode scalar values.
// These helpers convert between UTF-8 storage and that indexing.
namespace halspan::utf8 {

/// Throws Error(kInvalidUtf8) on malformed input, surrogates or overlongs.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);

std::size_t length(std::string_view text);

/// Substring by character offsets [start, end).
std::string slice(std::string_view text, std::size_t start, std::size_t end);

bool is_space(char32_t c) noexcept;

}  // namespace halspan::utf8
