#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "xlingua/error.hpp"
#include "xlingua/text.hpp"

namespace xlingua {

/// Flat `key = value` configuration. Blank lines and lines starting with '#'
/// are ignored. Later assignments of the same key override earlier ones, which
/// is how command-line overrides are layered on top of a file.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>") {
    KeyValueConfig cfg;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
      ++lineno;
      auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        fail(ErrorCategory::config, std::string(origin) + ":" + std::to_string(lineno) +
                                        ": expected key = value");
      }
      auto key = trim(line.substr(0, eq));
      if (key.empty()) {
        fail(ErrorCategory::config, std::string(origin) + ":" + std::to_string(lineno) + ": empty key");
      }
      cfg.set(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Applies a `key=value` override string.
  void apply_override(std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCategory::config, "override '" + std::string(assignment) + "' is not key=value");
    }
    set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Rejects any key outside `allowed`, naming the first offender.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : values_) {
      if (!allowed.count(k)) fail(ErrorCategory::config, "unknown config key '" + k + "'");
    }
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      fail(ErrorCategory::config, "key '" + key + "' expects a real number, got '" + it->second + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      fail(ErrorCategory::config, "key '" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail(ErrorCategory::config, "key '" + key + "' expects true/false, got '" + s + "'");
  }

  /// Serialized form; sorted by key so that echo files are byte-stable.
  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace xlingua
