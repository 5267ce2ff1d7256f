#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace judgekit {

/// Reads a whole file; throws std::runtime_error naming the path on failure.
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temp file in the same directory plus an atomic rename, so a
/// failed run never leaves a partial artifact behind.
void write_text_file_atomic(const std::filesystem::path& path,
                            std::string_view content);

std::string strip_trailing_whitespace(std::string_view text);

}  // namespace judgekit
