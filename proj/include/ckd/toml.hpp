#pragma once

// Minimal TOML subset reader for the pipeline config: [table] and [a.b]
// headers, `key = value` pairs with string/number/boolean/array values, and
// '#' comments. Keys are flattened to "table.key". Anything else is rejected
// with a line number, and the caller rejects keys it does not recognize.

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "ckd/error.hpp"

namespace ckd {

struct TomlValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::number;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<TomlValue> items;
  std::size_t line = 0;
};

using TomlTable = std::map<std::string, TomlValue>;

namespace toml_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool valid_key(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

inline TomlValue parse_scalar(const std::string& raw, std::size_t line) {
  TomlValue v;
  v.line = line;
  const std::string t = trim(raw);
  require(!t.empty(), "config", "line " + std::to_string(line) + ": empty value");
  if (t.front() == '"') {
    require(t.size() >= 2 && t.back() == '"', "config",
            "line " + std::to_string(line) + ": unterminated string");
    v.kind = TomlValue::Kind::string;
    v.str = t.substr(1, t.size() - 2);
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = (t == "true");
    return v;
  }
  try {
    std::size_t used = 0;
    v.num = std::stod(t, &used);
    require(used == t.size(), "config",
            "line " + std::to_string(line) + ": bad number '" + t + "'");
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail("config", "line " + std::to_string(line) + ": bad value '" + t + "'");
  }
  v.kind = TomlValue::Kind::number;
  return v;
}

inline TomlValue parse_value(const std::string& raw, std::size_t line) {
  const std::string t = trim(raw);
  if (!t.empty() && t.front() == '[') {
    require(t.back() == ']', "config",
            "line " + std::to_string(line) + ": unterminated array");
    TomlValue v;
    v.kind = TomlValue::Kind::array;
    v.line = line;
    std::string inner = t.substr(1, t.size() - 2);
    std::string cur;
    int depth = 0;
    bool in_str = false;
    for (char c : inner) {
      if (c == '"') in_str = !in_str;
      if (!in_str && c == '[') ++depth;
      if (!in_str && c == ']') --depth;
      if (!in_str && depth == 0 && c == ',') {
        if (!trim(cur).empty()) v.items.push_back(parse_scalar(cur, line));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!trim(cur).empty()) v.items.push_back(parse_scalar(cur, line));
    return v;
  }
  return parse_scalar(t, line);
}

// Strip a trailing comment that is not inside a string.
inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (!in_str && line[i] == '#') return line.substr(0, i);
  }
  return line;
}

}  // namespace toml_detail

inline TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = toml_detail::strip_comment(line);
    const std::string t = toml_detail::trim(line);
    if (t.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (t.front() == '[') {
      require(t.back() == ']', "config",
              "line " + std::to_string(line_no) + ": unterminated table header");
      section = toml_detail::trim(t.substr(1, t.size() - 2));
      require(toml_detail::valid_key(section), "config",
              "line " + std::to_string(line_no) + ": bad table name '" + section + "'");
      if (end == text.size()) break;
      continue;
    }
    const std::size_t eq = t.find('=');
    require(eq != std::string::npos, "config",
            "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = toml_detail::trim(t.substr(0, eq));
    require(toml_detail::valid_key(key), "config",
            "line " + std::to_string(line_no) + ": bad key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    require(table.find(full) == table.end(), "config",
            "line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
    table[full] = toml_detail::parse_value(t.substr(eq + 1), line_no);
    if (end == text.size()) break;
  }
  return table;
}

}  // namespace ckd
