#include "faasflow/config.hpp"

#include <fstream>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

} // namespace

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_text(text);
}

Config Config::from_text(std::string_view text) {
  Config config;
  std::size_t line_no = 0;
  for (std::string_view raw : split_lines(text)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    config.values_[std::move(key)] = std::move(value);
  }
  return config;
}

void Config::set(std::string key, std::string value) {
  values_[std::move(key)] = std::move(value);
}

bool Config::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string Config::get_string(const std::string& key, std::string fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? std::move(fallback) : it->second;
}

std::int64_t Config::get_i64(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  try {
    return parse_i64(it->second, "config key '" + key + "'");
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  std::int64_t v = get_i64(key, static_cast<std::int64_t>(fallback));
  if (v < 0) {
    throw ConfigError("config key '" + key + "': must be non-negative");
  }
  return static_cast<std::uint64_t>(v);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  try {
    std::size_t consumed = 0;
    double v = std::stod(it->second, &consumed);
    if (consumed != it->second.size()) {
      throw std::invalid_argument(it->second);
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    return fallback;
  }
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    return false;
  }
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

} // namespace faasflow
