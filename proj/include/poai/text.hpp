#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poai {

// Shortest decimal form that parses back to the same double.
std::string format_real(double value);

// Strict decimal parse of the whole field; nullopt on any trailing garbage.
std::optional<double> parse_real(std::string_view field);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

}  // namespace poai
