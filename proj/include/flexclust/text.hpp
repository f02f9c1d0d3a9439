#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace flexclust {

/// `%.9g` rendering used by every text artifact.
std::string format_number(double value);

/// The double nearest to value's 9-significant-digit rendering.
double round_to_9_digits(double value);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view text);

/// Parses a whole field as a double; false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_size(std::string_view text, std::size_t& out);

} // namespace flexclust
