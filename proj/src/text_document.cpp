#include "kinsdf/text_document.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

#include "kinsdf/errors.hpp"

namespace kinsdf {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Drop a trailing comment while respecting quoted strings.
std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

bool is_bare_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::string where) : text_(text), where_(std::move(where)) {}

  TextTable::Value parse() {
    skip_ws();
    TextTable::Value v = parse_value(true);
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(where_ + ": " + msg); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  TextTable::Value parse_value(bool allow_array) {
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') {
      if (!allow_array) fail("nested arrays are not supported");
      return parse_array();
    }
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
        const char e = text_[pos_ + 1];
        out.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
        pos_ += 2;
        continue;
      }
      out.push_back(text_[pos_++]);
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  double parse_number() {
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                  text_[end] == '-' || text_[end] == '+' || text_[end] == '_')) {
      ++end;
    }
    std::string token(text_.substr(pos_, end - pos_));
    std::erase(token, '_');
    if (token.empty()) fail("expected a value");
    if (token == "inf" || token == "+inf") {
      pos_ = end;
      return std::numeric_limits<double>::infinity();
    }
    if (token == "-inf") {
      pos_ = end;
      return -std::numeric_limits<double>::infinity();
    }
    const char* first = token.data();
    if (*first == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) fail("invalid number '" + token + "'");
    pos_ = end;
    return value;
  }

  TextTable::Array parse_array() {
    ++pos_;
    TextTable::Array out;
    skip_ws();
    while (pos_ < text_.size() && text_[pos_] != ']') {
      TextTable::Value v = parse_value(false);
      if (auto* d = std::get_if<double>(&v)) {
        out.emplace_back(*d);
      } else if (auto* s = std::get_if<std::string>(&v)) {
        out.emplace_back(*s);
      } else {
        fail("arrays may only hold numbers or strings");
      }
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        skip_ws();
      } else if (pos_ < text_.size() && text_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    if (pos_ >= text_.size()) fail("unterminated array");
    ++pos_;
    return out;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::string where_;
};

[[noreturn]] void type_error(const TextTable& t, const std::string& key, const char* expected) {
  throw ParseError(t.context + ": key '" + key + "' must be " + expected);
}

}  // namespace

const TextTable::Value* TextTable::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void TextTable::set(const std::string& key, Value value) {
  if (!values_.count(key)) order_.push_back(key);
  values_[key] = std::move(value);
}

double TextTable::number(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw ParseError(context + ": missing key '" + key + "'");
  if (auto* d = std::get_if<double>(v)) return *d;
  type_error(*this, key, "a number");
}

double TextTable::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

bool TextTable::boolean_or(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (auto* b = std::get_if<bool>(v)) return *b;
  type_error(*this, key, "a boolean");
}

std::string TextTable::string(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw ParseError(context + ": missing key '" + key + "'");
  if (auto* s = std::get_if<std::string>(v)) return *s;
  type_error(*this, key, "a string");
}

std::string TextTable::string_or(const std::string& key, std::string fallback) const {
  return has(key) ? string(key) : std::move(fallback);
}

std::vector<double> TextTable::numbers(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw ParseError(context + ": missing key '" + key + "'");
  const auto* arr = std::get_if<Array>(v);
  if (!arr) type_error(*this, key, "an array of numbers");
  std::vector<double> out;
  out.reserve(arr->size());
  for (const auto& e : *arr) {
    const auto* d = std::get_if<double>(&e);
    if (!d) type_error(*this, key, "an array of numbers");
    out.push_back(*d);
  }
  return out;
}

Eigen::Vector3d TextTable::vec3(const std::string& key) const {
  const auto v = numbers(key);
  if (v.size() != 3) type_error(*this, key, "an array of 3 numbers");
  return {v[0], v[1], v[2]};
}

Eigen::Vector3d TextTable::vec3_or(const std::string& key, const Eigen::Vector3d& fallback) const {
  return has(key) ? vec3(key) : fallback;
}

std::vector<std::string> TextTable::strings(const std::string& key) const {
  const Value* v = find(key);
  if (!v) throw ParseError(context + ": missing key '" + key + "'");
  const auto* arr = std::get_if<Array>(v);
  if (!arr) type_error(*this, key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *arr) {
    const auto* s = std::get_if<std::string>(&e);
    if (!s) type_error(*this, key, "an array of strings");
    out.push_back(*s);
  }
  return out;
}

const TextTable* TextDocument::table(const std::string& name) const {
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

const std::vector<TextTable>& TextDocument::array(const std::string& name) const {
  static const std::vector<TextTable> empty;
  auto it = arrays_.find(name);
  return it == arrays_.end() ? empty : it->second;
}

TextDocument TextDocument::parse(std::string_view text, const std::string& source_name) {
  TextDocument doc;
  doc.root_.context = source_name;
  TextTable* current = &doc.root_;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source_name + ":" + std::to_string(line_no);
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.rfind("[[", 0) == 0) {
      if (line.size() < 4 || line.substr(line.size() - 2) != "]]") throw ParseError(where + ": malformed [[header]]");
      const std::string name = trim(line.substr(2, line.size() - 4));
      if (!is_bare_key(name)) throw ParseError(where + ": invalid table name '" + name + "'");
      auto& list = doc.arrays_[name];
      list.emplace_back();
      list.back().context = source_name + " [[" + name + "]] #" + std::to_string(list.size());
      current = &list.back();
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": malformed [header]");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!is_bare_key(name)) throw ParseError(where + ": invalid table name '" + name + "'");
      if (doc.tables_.count(name)) throw ParseError(where + ": duplicate table [" + name + "]");
      current = &doc.tables_[name];
      current->context = source_name + " [" + name + "]";
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!is_bare_key(key)) throw ParseError(where + ": invalid key '" + key + "'");
    if (current->has(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    current->set(key, ValueParser(line.substr(eq + 1), where).parse());
  }
  return doc;
}

TextDocument TextDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.filename().string());
}

}  // namespace kinsdf
