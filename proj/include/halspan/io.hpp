#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace halspan::io {

/// Writes through a sibling temp file and renames it over `path`, so readers
/// never observe a partially written file. Throws Error(kIoError).
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace halspan::io
