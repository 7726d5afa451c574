#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace minee::csv {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
/// Throws std::invalid_argument on anything but a complete number.
double parse_double(std::string_view text);
long parse_long(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line);

}  // namespace minee::csv
