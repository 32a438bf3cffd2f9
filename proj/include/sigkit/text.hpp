#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sigkit {

std::string_view trim(std::string_view s);

// Splits on '\n', dropping a trailing '\r' from each line (so CRLF input
// works). The final fragment after the last newline is included, even when
// empty.
std::vector<std::string_view> split_lines(std::string_view text);

// Splits on a single delimiter character; fields are trimmed. Does not
// collapse empty fields.
std::vector<std::string_view> split_fields(std::string_view line, char delim);

// Splits on runs of spaces/tabs; empty tokens never appear.
std::vector<std::string_view> split_whitespace(std::string_view line);

// Strict numeric parsing: the whole (trimmed) token must be consumed.
// Throws DomainError otherwise.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

// Shortest representation that round-trips the exact double.
std::string format_double(double x);

std::string lower(std::string_view s);

}  // namespace sigkit
