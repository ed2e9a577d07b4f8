#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mces::csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view text);

// Strict decimal parse of the whole cell; returns false on junk.
bool parse_double(std::string_view text, double& out);
bool parse_long(std::string_view text, long& out);

// Shortest representation that round-trips exactly.
std::string format_double(double value);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace mces::csv
