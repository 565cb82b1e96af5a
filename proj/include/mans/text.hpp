#pragma once

// Small string helpers shared by the text formats and the config parser.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mans {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::vector<std::string_view> split_char(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Value parsers; failures throw ArgumentError naming the key.
std::size_t parse_count(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_real(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

struct KeyValue {
  std::string key;
  std::string value;
  long line = 0;
};

/// "key = value" lines; blank lines and '#' comments are skipped. A line
/// without '=' or with an empty key throws ParseError.
std::vector<KeyValue> read_key_values(std::istream& in);

/// Splits "key=value"; throws ArgumentError if there is no '='.
KeyValue split_assignment(const std::string& text);

}  // namespace mans
