#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace augmentor {

std::string_view trim(std::string_view s);

std::vector<std::string_view> split_lines(std::string_view text);

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Shortest round-trip decimal representation ("0.3", "1", "0.125").
std::string format_double(double value);

// Reads a whole file; throws PreconditionError("FileNotFound") if absent.
std::string read_file(const std::string& path);

// Writes (truncating) a whole file; throws Error("IoError") on failure.
void write_file(const std::string& path, std::string_view contents);

}  // namespace augmentor
