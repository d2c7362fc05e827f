#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xtalk {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key-value configuration with dotted section keys:
///
///     # comment
///     code.d = 5
///     noise.p_g = 1e-3
///
/// Later assignments override earlier ones.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void erase(const std::string& key) { values_.erase(key); }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::optional<double> find_double(const std::string& key) const;

  /// Keys under `prefix.` with the prefix stripped.
  std::map<std::string, std::string> section(const std::string& prefix) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted `key = value` lines; stable across whitespace and ordering changes.
  std::string canonical_text() const;
  /// FNV-1a 64 of canonical_text(), as 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

/// Parses a grid specification: a comma-separated list ("1e-4, 3e-4"), or
/// "log:START:STOP:N" / "lin:START:STOP:N".
std::vector<double> parse_grid(std::string_view text);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace xtalk
