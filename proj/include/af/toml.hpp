// Minimal TOML-subset reader used for all on-disk configuration
// (array geometry, camera models, scene scripts, pipeline configs).
//
// Supported: comments (#), [section], [[array-of-tables]], and
// `key = value` pairs where value is a string, bool, integer, float or a
// (possibly nested, possibly multi-line) array. That is the full grammar
// the shipped profiles use; anything else is a parse error.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace af::toml {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Value {
 public:
  using Array = std::vector<Value>;

  Value() = default;
  explicit Value(bool b) : data_(b) {}
  explicit Value(std::int64_t i) : data_(i) {}
  explicit Value(double d) : data_(d) {}
  explicit Value(std::string s) : data_(std::move(s)) {}
  explicit Value(Array a) : data_(std::move(a)) {}

  bool is_bool() const { return std::holds_alternative<bool>(data_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data_); }
  bool is_float() const { return std::holds_alternative<double>(data_); }
  bool is_number() const { return is_int() || is_float(); }
  bool is_string() const { return std::holds_alternative<std::string>(data_); }
  bool is_array() const { return std::holds_alternative<Array>(data_); }

  bool as_bool() const;
  std::int64_t as_int() const;
  double as_double() const;  // accepts integers as well
  const std::string& as_string() const;
  const Array& as_array() const;

  std::vector<double> as_double_array() const;

 private:
  std::variant<std::monostate, bool, std::int64_t, double, std::string, Array> data_;
};

class Table {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const Value& at(const std::string& key) const;

  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  bool has_table(const std::string& name) const { return tables_.count(name) > 0; }
  const Table& table(const std::string& name) const;
  bool has_table_array(const std::string& name) const { return table_arrays_.count(name) > 0; }
  const std::vector<Table>& table_array(const std::string& name) const;

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  friend Table parse(const std::string& text);

 private:
  std::map<std::string, Value> values_;
  std::map<std::string, Table> tables_;
  std::map<std::string, std::vector<Table>> table_arrays_;
};

Table parse(const std::string& text);
Table parse_file(const std::string& path);

}  // namespace af::toml
