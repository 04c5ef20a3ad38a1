#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcmap::io {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

/// Throws an Io error if the stream went bad while writing.
void finish_output(std::ofstream& out, const std::filesystem::path& path);

std::vector<std::string> split(std::string_view line, char sep);

/// Strict decimal parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);

}  // namespace lcmap::io
