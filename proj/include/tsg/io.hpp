#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tsg {

/// Writes `content` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// printf("%.17g"), which round-trips every double.
std::string format_double(double v);

}  // namespace tsg
