#include "faasflow/text.hpp"

#include <charconv>
#include <cstdio>

#include "faasflow/errors.hpp"

namespace faasflow {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t at = text.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, at - start));
    start = at + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t at = text.find('\n', start);
    if (at == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, at - start));
    start = at + 1;
  }
  return out;
}

std::int64_t parse_i64(std::string_view field, std::string_view what) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    throw FormatError(std::string(what) + ": not a base-10 integer: '" +
                      std::string(field) + "'");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view field, std::string_view what) {
  std::int64_t value = parse_i64(field, what);
  if (value < 0) {
    throw FormatError(std::string(what) + ": negative value: '" +
                      std::string(field) + "'");
  }
  return static_cast<std::uint64_t>(value);
}

std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string pad4(std::size_t value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", value);
  return buf;
}

bool starts_with(std::string_view text, std::string_view prefix) {
  return text.size() >= prefix.size() && text.substr(0, prefix.size()) == prefix;
}

} // namespace faasflow
