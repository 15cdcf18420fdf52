#pragma once

// Strict JSON config reading with line-precise errors.

#include <cctype>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stmeta/errors.hpp"

namespace stmeta::util {

/// A config problem at a JSON pointer; converted to ConfigError with a line.
struct ConfigIssue {
  std::string pointer;
  std::string message;
  int line = 0;  // set when known at the throw site
};

inline std::string pointer_escape(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

/// Maps the JSON pointer of every value in `text` to its 1-based line.
/// Expects text that already parsed; a repeated object key raises ConfigIssue.
class JsonLineMap {
 public:
  explicit JsonLineMap(std::string_view text) : text_(text) {
    skip_ws();
    if (pos_ < text_.size()) value("");
  }

  int line_of(std::string pointer) const {
    for (;;) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 1;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        ++pos_;
        if (pos_ < text_.size() && text_[pos_] != 'u') out += text_[pos_] == 'n' ? '\n' : text_[pos_];
      } else {
        out += text_[pos_];
      }
      ++pos_;
    }
    ++pos_;  // closing quote
    return out;
  }

  void value(const std::string& ptr) {
    lines_.emplace(ptr, line_);
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      std::map<std::string, bool> seen;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == '}') break;
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        const int key_line = line_;
        const std::string key = string_token();
        const std::string child = ptr + "/" + pointer_escape(key);
        if (!seen.emplace(key, true).second) {
          throw ConfigIssue{child, "duplicate key '" + key + "'", key_line};
        }
        skip_ws();
        ++pos_;  // colon
        skip_ws();
        value(child);
        lines_[child] = key_line;
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      std::size_t index = 0;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == ']') break;
        if (text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        value(ptr + "/" + std::to_string(index++));
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

inline int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t k = 0; k < offset && k < text.size(); ++k) line += text[k] == '\n';
  return line;
}

/// Parses text; syntax errors become ConfigError `source:line: ...`.
inline nlohmann::json parse_json_text(std::string_view text, std::string_view source) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    if (auto k = what.find("parse error"); k != std::string::npos) what = what.substr(k);
    throw ConfigError(std::string(source) + ":" + std::to_string(line_of_offset(text, at)) + ": invalid JSON: " + what);
  }
}

/// Read-only cursor over one JSON value and its pointer.
class Node {
 public:
  Node(const nlohmann::json& j, std::string pointer) : j_(&j), ptr_(std::move(pointer)) {}

  const nlohmann::json& json() const { return *j_; }
  const std::string& pointer() const { return ptr_; }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigIssue{ptr_, message}; }

  const Node& object(std::initializer_list<std::string_view> allowed) const {
    if (!j_->is_object()) fail("expected an object");
    for (const auto& [key, _] : j_->items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) throw ConfigIssue{ptr_ + "/" + pointer_escape(key), "unknown key '" + key + "'"};
    }
    return *this;
  }

  bool has(std::string_view key) const { return j_->is_object() && j_->contains(key); }
  Node at(std::string_view key) const {
    if (!has(key)) fail("missing required key '" + std::string(key) + "'");
    return Node(j_->at(std::string(key)), ptr_ + "/" + pointer_escape(key));
  }
  Node at(std::size_t index) const { return Node(j_->at(index), ptr_ + "/" + std::to_string(index)); }
  std::size_t size() const { return j_->size(); }

  const Node& array() const {
    if (!j_->is_array()) fail("expected an array");
    return *this;
  }

  std::string as_string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  double as_double() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  bool as_bool() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::uint64_t as_u64() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j_->get<std::int64_t>());
    fail("expected a non-negative integer");
  }
  std::size_t as_size(std::size_t min = 0) const {
    const auto v = as_u64();
    if (v < min) fail("must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }
  int as_int() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    const auto v = j_->get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail("integer out of range");
    return static_cast<int>(v);
  }

  void read(std::string_view key, std::size_t& out, std::size_t min = 0) const {
    if (has(key)) out = at(key).as_size(min);
  }
  void read(std::string_view key, double& out) const {
    if (has(key)) out = at(key).as_double();
  }
  void read(std::string_view key, bool& out) const {
    if (has(key)) out = at(key).as_bool();
  }
  void read(std::string_view key, std::string& out) const {
    if (has(key)) out = at(key).as_string();
  }

 private:
  const nlohmann::json* j_;
  std::string ptr_;
};

/// Runs `fn` over parsed text, mapping ConfigIssue to ConfigError `source:line: message (at pointer)`.
template <class Fn>
auto with_config_lines(std::string_view text, std::string_view source, Fn fn) {
  auto error = [&](const ConfigIssue& issue, int line) {
    const std::string where = issue.pointer.empty() ? "" : " (at " + issue.pointer + ")";
    return ConfigError(std::string(source) + ":" + std::to_string(line) + ": " + issue.message + where);
  };
  const auto j = parse_json_text(text, source);
  std::optional<JsonLineMap> lines;
  try {
    lines.emplace(text);
  } catch (const ConfigIssue& dup) {
    throw error(dup, dup.line);
  }
  try {
    return fn(Node(j, ""));
  } catch (const ConfigIssue& issue) {
    throw error(issue, issue.line ? issue.line : lines->line_of(issue.pointer));
  }
}

}  // namespace stmeta::util
