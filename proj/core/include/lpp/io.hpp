#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lpp {

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

/// Non-empty lines of a text file (trailing '\r' removed).
std::vector<std::string> read_nonempty_lines(const std::filesystem::path& path);

}  // namespace lpp
