#include "xtalk/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace xtalk {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text) {
  text = trim(text);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    // Allow integral floating forms such as 1e6.
    const double d = parse_double(text);
    if (d != std::floor(d) || std::abs(d) > 9e18) {
      throw ConfigError("not an integer: '" + std::string(text) + "'");
    }
    return static_cast<std::int64_t>(d);
  }
  return value;
}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    cfg.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  try {
    return parse_double(get_string(key));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(const std::string& key) const {
  try {
    return parse_int(get_string(key));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::optional<double> Config::find_double(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key);
}

std::map<std::string, std::string> Config::section(const std::string& prefix) const {
  std::map<std::string, std::string> out;
  const std::string dotted = prefix + ".";
  for (auto it = values_.lower_bound(dotted); it != values_.end(); ++it) {
    if (it->first.compare(0, dotted.size(), dotted) != 0) break;
    out[it->first.substr(dotted.size())] = it->second;
  }
  return out;
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

std::string Config::hash() const { return fnv1a_hex(canonical_text()); }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::vector<double> parse_grid(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ConfigError("empty grid");
  const bool is_log = text.rfind("log:", 0) == 0;
  const bool is_lin = text.rfind("lin:", 0) == 0;
  if (is_log || is_lin) {
    const auto parts = split(text.substr(4), ':');
    if (parts.size() != 3) throw ConfigError("grid must be log:START:STOP:N or lin:START:STOP:N");
    const double start = parse_double(parts[0]);
    const double stop = parse_double(parts[1]);
    const auto n = parse_int(parts[2]);
    if (n < 1) throw ConfigError("grid needs at least one point");
    if (is_log && (start <= 0 || stop <= 0)) throw ConfigError("log grid bounds must be positive");
    std::vector<double> out;
    for (std::int64_t i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      if (i == 0 || i == n - 1) {
        out.push_back(i == 0 ? start : stop);
      } else {
        out.push_back(is_log ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start)))
                             : start + f * (stop - start));
      }
    }
    return out;
  }
  std::vector<double> out;
  for (const auto part : split(text, ',')) {
    if (part.empty()) throw ConfigError("empty grid entry");
    out.push_back(parse_double(part));
  }
  return out;
}

}  // namespace xtalk
