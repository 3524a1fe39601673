#pragma once

// Minimal CSV helpers shared by the readers and writers.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gpmix::csv {

/// Splits one record on commas, honouring double-quoted fields.
std::vector<std::string> split_record(std::string_view line);

/// Splits text into lines, dropping a trailing '\r' and the final empty line.
std::vector<std::string_view> lines(std::string_view text);

std::optional<double> parse_double(std::string_view s);
std::optional<long> parse_long(std::string_view s);

/// Shortest round-trip representation.
std::string format_double(double x);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace gpmix::csv
