#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace coherelab::io {

// Whole-file read/write. Failures throw Error(IoError).
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

// Strict decimal parse of the whole string.
std::optional<double> parse_double(std::string_view text);

}  // namespace coherelab::io
