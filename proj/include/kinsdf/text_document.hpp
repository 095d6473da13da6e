#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace kinsdf {

/// Minimal TOML subset used by robot descriptions, system specs and grasp
/// problems. Supported: `key = value` pairs, `[table]` headers,
/// `[[array-of-tables]]` headers, `#` comments, and values that are
/// numbers, booleans, double-quoted strings or flat arrays of numbers or
/// strings. See docs/formats.md.
class TextTable {
 public:
  using Array = std::vector<std::variant<double, std::string>>;
  using Value = std::variant<double, bool, std::string, Array>;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const Value* find(const std::string& key) const;

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string string(const std::string& key) const;
  std::string string_or(const std::string& key, std::string fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  Eigen::Vector3d vec3(const std::string& key) const;
  Eigen::Vector3d vec3_or(const std::string& key, const Eigen::Vector3d& fallback) const;
  std::vector<std::string> strings(const std::string& key) const;

  const std::vector<std::string>& keys() const { return order_; }
  void set(const std::string& key, Value value);

  /// Location used in error messages, e.g. "arm.robot.toml [[link]] #2".
  std::string context;

 private:
  std::map<std::string, Value> values_;
  std::vector<std::string> order_;
};

class TextDocument {
 public:
  const TextTable& root() const { return root_; }
  /// Named `[table]`; nullptr when absent.
  const TextTable* table(const std::string& name) const;
  /// Entries of `[[name]]` in document order; empty when absent.
  const std::vector<TextTable>& array(const std::string& name) const;

  static TextDocument parse(std::string_view text, const std::string& source_name);
  static TextDocument load(const std::filesystem::path& path);

 private:
  TextTable root_;
  std::map<std::string, TextTable> tables_;
  std::map<std::string, std::vector<TextTable>> arrays_;
};

}  // namespace kinsdf
