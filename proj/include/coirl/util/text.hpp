#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace coirl::util {

// Shortest round-trip decimal form.
std::string format_double(double v);
// Throws DataError when the whole string is not a number.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace coirl::util
