#include "mans/text.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "mans/errors.hpp"

namespace mans {

namespace {

constexpr std::string_view kSpace = " \t\r\n\v\f";

template <typename Number>
Number parse_exact(const std::string& key, const std::string& value, const char* kind) {
  const auto body = trim(value);
  Number out{};
  const char* first = body.data();
  const char* last = body.data() + body.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (body.empty() || ec != std::errc() || ptr != last) {
    throw ArgumentError("key \"" + key + "\": expected " + kind + ", got \"" + value + "\"");
  }
  return out;
}

}  // namespace

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(kSpace);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(kSpace);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    pos = s.find_first_not_of(kSpace, pos);
    if (pos == std::string_view::npos) break;
    auto end = s.find_first_of(kSpace, pos);
    if (end == std::string_view::npos) end = s.size();
    out.push_back(s.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto end = s.find(sep, pos);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, end - pos));
    pos = end + 1;
  }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  return parse_exact<std::size_t>(key, value, "a non-negative integer");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  return parse_exact<std::uint64_t>(key, value, "an unsigned integer");
}

double parse_real(const std::string& key, const std::string& value) {
  const double v = parse_exact<double>(key, value, "a number");
  if (!std::isfinite(v)) throw ArgumentError("key \"" + key + "\": value must be finite");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("key \"" + key + "\": expected true or false, got \"" + value + "\"");
}

std::vector<KeyValue> read_key_values(std::istream& in) {
  std::vector<KeyValue> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = line;
    if (const auto hash = body.find('#'); hash != std::string::npos) body.resize(hash);
    const auto text = trim(body);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected \"key = value\"", line_no);
    const auto key = trim(text.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out.push_back({std::string(key), std::string(trim(text.substr(eq + 1))), line_no});
  }
  return out;
}

KeyValue split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) {
    throw ArgumentError("expected key=value, got \"" + text + "\"");
  }
  const auto key = trim(std::string_view(text).substr(0, eq));
  if (key.empty()) throw ArgumentError("empty key in \"" + text + "\"");
  return {std::string(key), std::string(trim(std::string_view(text).substr(eq + 1))), 0};
}

}  // namespace mans
