#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cnnqoe {

// Shortest decimal spelling that parses back to exactly the same double.
std::string format_double(double v);

// Strict full-field numeric parses; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

}  // namespace cnnqoe
