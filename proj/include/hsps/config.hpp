// ============================================================================
// config.hpp -- flat key/value configuration files
//
//   # comment
//   key = value
//
// Keys are unique.  Every lookup records the value actually used (the default
// when absent), so `resolved()` yields the fully materialised configuration.
// ============================================================================
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hsps/errors.hpp"
#include "hsps/fock_model.hpp"

namespace hsps {

namespace detail {

/// Shortest text that reads back as the same double.
inline std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

class KeyValueConfig {
public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw FormatError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      const auto key = detail::trim(std::string_view(body).substr(0, eq));
      const auto value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key.empty()) throw FormatError(source + ":" + std::to_string(line_no) + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        throw FormatError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open config");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    resolved_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      resolved_[key] = detail::shortest(fallback);
      return fallback;
    }
    const double v = to_double(key, it->second);
    resolved_[key] = it->second;
    return v;
  }

  std::optional<double> get_optional_double(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    resolved_[key] = it->second;
    return to_double(key, it->second);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      resolved_[key] = std::to_string(fallback);
      return fallback;
    }
    resolved_[key] = it->second;
    return to_u64(key, it->second);
  }

  /// "start:stop:count" (inclusive linear grid) or a comma separated list.
  std::vector<double> get_grid(const std::string& key, const std::string& fallback) {
    return parse_grid(key, get_string(key, fallback));
  }

  /// Keys present in the file but never looked up.
  [[nodiscard]] std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!resolved_.count(k) && !ignored_.count(k)) out.push_back(k);
    return out;
  }

  void ignore(const std::string& key) { ignored_.insert(key); }

  /// Rejects keys that no lookup consumed.
  void require_all_used() const {
    const auto unused = unused_keys();
    if (!unused.empty()) throw DomainError("unknown config key '" + unused.front() + "'");
  }

  [[nodiscard]] const std::map<std::string, std::string>& resolved() const { return resolved_; }
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  static std::vector<double> parse_grid(const std::string& key, const std::string& text) {
    std::vector<double> out;
    if (detail::trim(text).empty()) throw DomainError("grid '" + key + "' is empty");
    const auto colon = std::count(text.begin(), text.end(), ':');
    if (colon == 2) {
      const auto c1 = text.find(':');
      const auto c2 = text.find(':', c1 + 1);
      const double a = to_double(key, detail::trim(text.substr(0, c1)));
      const double b = to_double(key, detail::trim(text.substr(c1 + 1, c2 - c1 - 1)));
      const auto n = to_u64(key, detail::trim(text.substr(c2 + 1)));
      if (n == 0) throw DomainError("grid '" + key + "' has zero points");
      if (n == 1) return {a};
      for (std::uint64_t i = 0; i < n; ++i)
        out.push_back(i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, detail::trim(item)));
    return out;
  }

  static double to_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      throw DomainError("config key '" + key + "': not a number: '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v))
      throw DomainError("config key '" + key + "': not a finite number: '" + text + "'");
    return v;
  }

  static std::uint64_t to_u64(const std::string& key, const std::string& text) {
    // Accept integral values written in exponent form, e.g. 1e8.
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && ptr == text.data() + text.size()) return v;
    const double d = to_double(key, text);
    if (d < 0.0 || d != std::floor(d) || d > 1.8e19)
      throw DomainError("config key '" + key + "': not a non-negative integer: '" + text + "'");
    return static_cast<std::uint64_t>(d);
  }

private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
  std::set<std::string> ignored_;
};

}  // namespace hsps
