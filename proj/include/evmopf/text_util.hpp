#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evmopf::text {

/// Locale-independent parse of a complete token; accepts a leading '+' and Inf/NaN
/// spellings. Returns nullopt when any character is left unconsumed.
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);
/// Fixed number of significant digits ("%.<digits>g" without locale influence).
std::string format_double(double value, int significant_digits);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view line, char delimiter);

}  // namespace evmopf::text
