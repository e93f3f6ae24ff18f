#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sublaplace::io {

/// Reads a whole file; IoError names the path on failure.
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failure never leaves a partially written output behind.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double value);

}  // namespace sublaplace::io
