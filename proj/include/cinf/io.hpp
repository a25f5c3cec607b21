#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cinf::io {

// Every text artifact starts with a "#schema=<name>/<version>" line.
std::string schema_line(std::string_view name, int version);

// Reads lines of a text artifact, verifying the schema line when present and
// skipping further '#' comment lines and blank lines.
std::vector<std::string> read_data_lines(const std::filesystem::path& path,
                                         std::string_view expected_schema);

std::vector<std::string> split(std::string_view line, char sep);

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Round-trippable shortest decimal form of a double.
std::string format_double(double value);

double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

}  // namespace cinf::io
