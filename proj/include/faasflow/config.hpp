#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace faasflow {

// Flat key = value configuration. One assignment per line, '#' lines are
// comments, later assignments win. CLI overrides land via set().
class Config {
public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path);
  static Config from_text(std::string_view text);

  void set(std::string key, std::string value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, std::string fallback) const;
  std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

} // namespace faasflow
