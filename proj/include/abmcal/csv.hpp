#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace abmcal::csv {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Splits on '\n', dropping a trailing '\r' per line and a final empty line.
std::vector<std::string_view> lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace abmcal::csv
