#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace parity::csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Shortest round-trip decimal form.
std::string format(double value);

bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::string_view trim(std::string_view s);

}  // namespace parity::csv
