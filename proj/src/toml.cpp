#include "af/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace af::toml {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ParseError("toml: line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

class Cursor {
 public:
  Cursor(const std::string& s, std::size_t line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "unexpected end of value");
    return s_[pos_];
  }
  char take() {
    char c = peek();
    ++pos_;
    return c;
  }
  std::size_t line() const { return line_; }

  Value parse_value() {
    char c = peek();
    if (c == '[') return parse_array();
    if (c == '"') return parse_string();
    return parse_scalar();
  }

 private:
  Value parse_array() {
    take();  // '['
    Value::Array items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return Value(std::move(items));
    }
    for (;;) {
      items.push_back(parse_value());
      char c = take();
      if (c == ']') break;
      if (c != ',') fail(line_, "expected ',' or ']' in array");
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {  // trailing comma
        ++pos_;
        break;
      }
    }
    return Value(std::move(items));
  }

  Value parse_string() {
    take();  // '"'
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(line_, "unsupported escape");
        }
      } else {
        out += c;
      }
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;  // closing quote
    return Value(std::move(out));
  }

  Value parse_scalar() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    if (tok.empty()) fail(line_, "empty value");
    if (tok == "true") return Value(true);
    if (tok == "false") return Value(false);
    bool looks_float = tok.find_first_of(".eE") != std::string::npos ||
                       tok == "inf" || tok == "-inf" || tok == "nan";
    if (!looks_float) {
      std::int64_t iv = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
      if (ec == std::errc() && p == tok.data() + tok.size()) return Value(iv);
    }
    try {
      std::size_t used = 0;
      double dv = std::stod(tok, &used);
      if (used == tok.size()) return Value(dv);
    } catch (const std::exception&) {
    }
    fail(line_, "cannot parse value '" + tok + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_str = false;
  for (char c : s) {
    if (c == '"') in_str = !in_str;
    if (in_str) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

}  // namespace

bool Value::as_bool() const {
  if (!is_bool()) throw ParseError("toml: value is not a boolean");
  return std::get<bool>(data_);
}

std::int64_t Value::as_int() const {
  if (!is_int()) throw ParseError("toml: value is not an integer");
  return std::get<std::int64_t>(data_);
}

double Value::as_double() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data_));
  if (!is_float()) throw ParseError("toml: value is not a number");
  return std::get<double>(data_);
}

const std::string& Value::as_string() const {
  if (!is_string()) throw ParseError("toml: value is not a string");
  return std::get<std::string>(data_);
}

const Value::Array& Value::as_array() const {
  if (!is_array()) throw ParseError("toml: value is not an array");
  return std::get<Array>(data_);
}

std::vector<double> Value::as_double_array() const {
  const Array& a = as_array();
  std::vector<double> out;
  out.reserve(a.size());
  for (const Value& v : a) out.push_back(v.as_double());
  return out;
}

const Value& Table::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParseError("toml: missing key '" + key + "'");
  return it->second;
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? at(key).as_bool() : fallback;
}
std::int64_t Table::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? at(key).as_int() : fallback;
}
double Table::get_double(const std::string& key, double fallback) const {
  return has(key) ? at(key).as_double() : fallback;
}
std::string Table::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).as_string() : fallback;
}

const Table& Table::table(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw ParseError("toml: missing table [" + name + "]");
  return it->second;
}

const std::vector<Table>& Table::table_array(const std::string& name) const {
  auto it = table_arrays_.find(name);
  if (it == table_arrays_.end()) throw ParseError("toml: missing table array [[" + name + "]]");
  return it->second;
}

Table parse(const std::string& text) {
  Table root;
  Table* current = &root;

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;

    if (s.size() >= 4 && s.substr(0, 2) == "[[") {
      if (s.substr(s.size() - 2) != "]]") fail(lineno, "malformed [[table]] header");
      std::string name = trim(s.substr(2, s.size() - 4));
      if (name.empty()) fail(lineno, "empty table-array name");
      root.table_arrays_[name].emplace_back();
      current = &root.table_arrays_[name].back();
      continue;
    }
    if (s.front() == '[') {
      if (s.back() != ']') fail(lineno, "malformed [table] header");
      std::string name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) fail(lineno, "empty table name");
      current = &root.tables_[name];
      continue;
    }

    std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string rhs = trim(s.substr(eq + 1));
    if (key.empty()) fail(lineno, "empty key");

    // Multi-line arrays: keep appending lines until brackets balance.
    std::size_t first_line = lineno;
    while (bracket_balance(rhs) > 0) {
      std::string more;
      if (!std::getline(in, more)) fail(first_line, "unterminated array");
      ++lineno;
      rhs += " " + trim(strip_comment(more));
    }

    Cursor cur(rhs, first_line);
    Value v = cur.parse_value();
    if (!cur.done()) fail(first_line, "trailing characters after value");
    if (current->values_.count(key)) fail(first_line, "duplicate key '" + key + "'");
    current->values_[key] = std::move(v);
  }
  return root;
}

Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("toml: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace af::toml
