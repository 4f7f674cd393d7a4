#pragma once

#include "core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gwb {

/// Flat `key = value` text with `[section]` headers. Keys are stored as "section.key".
/// `#` and `;` start comments; list values are comma separated.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text) {
    ConfigFile cf;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto cut = line.find_first_of("#;");
      if (cut != std::string::npos) line.erase(cut);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) fail(lineno, "empty section name");
        cf.sections_.push_back(section);
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected key = value");
      std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) fail(lineno, "empty key");
      std::string full = section.empty() ? key : section + "." + key;
      if (cf.values_.count(full)) fail(lineno, "duplicate key " + full);
      cf.values_[full] = value;
    }
    return cf;
  }

  static ConfigFile load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::config, "cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool has_section(const std::string& s) const {
    if (std::find(sections_.begin(), sections_.end(), s) == sections_.end()) return false;
    for (const auto& [k, v] : values_)
      if (k.rfind(s + ".", 0) == 0) return true;
    return false;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "missing key " + key);
    return it->second;
  }

  double num(const std::string& key, double fallback) const { return has(key) ? to_double(key, str(key)) : fallback; }
  double num(const std::string& key) const { return to_double(key, str(key)); }

  long integer(const std::string& key, long fallback) const { return has(key) ? to_long(key, str(key)) : fallback; }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [key, v] : values_) k.push_back(key);
    return k;
  }

  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

 private:
  [[noreturn]] static void fail(int lineno, const std::string& msg) {
    throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": " + msg);
  }
  static double to_double(const std::string& key, const std::string& v) {
    std::string s = trim(v);
    if (s == "pi") return 3.14159265358979323846;
    if (s == "pi/2") return 1.57079632679489661923;
    double d = 0.0;
    const char* b = s.data();
    if (!s.empty() && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, s.data() + s.size(), d);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorKind::config, "key " + key + ": not a number: '" + s + "'");
    return d;
  }
  static long to_long(const std::string& key, const std::string& v) {
    long out = 0;
    std::string s = trim(v);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorKind::config, "key " + key + ": not an integer: '" + s + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> sections_;
};

}  // namespace gwb
