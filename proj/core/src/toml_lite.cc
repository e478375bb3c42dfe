// Copyright 2026 The ICR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "icr/toml_lite.h"

#include <cctype>
#include <charconv>
#include <string>
#include <vector>

#include "icr/errors.h"

namespace icr {
namespace {

using nlohmann::json;

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        std::vector<std::string> path = parse_key_path();
        skip_spaces();
        expect(']');
        table = &root;
        for (const auto& part : path) {
          json& next = (*table)[part];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) fail("key '" + part + "' is not a table");
          table = &next;
        }
      } else {
        parse_key_value(*table);
      }
      finish_line();
    }
    return root;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("TOML parse error at line " + std::to_string(line()) +
                      ": " + what);
  }

  int line() const {
    int n = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') ++n;
    }
    return n;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  // Whitespace, comments and newlines (inside arrays and between lines).
  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r' || peek() == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  void finish_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (!at_end() && peek() != '\n') fail("unexpected trailing content");
  }

  static bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path;
    while (true) {
      skip_spaces();
      if (peek() == '"') {
        path.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        path.push_back(parse_literal_string());
      } else {
        const std::size_t start = pos_;
        while (!at_end() && is_bare_key_char(peek())) ++pos_;
        if (start == pos_) fail("expected a key");
        path.emplace_back(text_.substr(start, pos_ - start));
      }
      skip_spaces();
      if (peek() != '.') break;
      ++pos_;
    }
    return path;
  }

  void parse_key_value(json& table) {
    std::vector<std::string> path = parse_key_path();
    skip_spaces();
    expect('=');
    skip_spaces();
    json value = parse_value();
    json* target = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& next = (*target)[path[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(path.back())) {
      fail("duplicate key '" + path.back() + "'");
    }
    (*target)[path.back()] = std::move(value);
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') {
      if (text_.substr(pos_, 3) == "\"\"\"") return parse_multiline_basic();
      return parse_basic_string();
    }
    if (c == '\'') {
      if (text_.substr(pos_, 3) == "'''") return parse_multiline_literal();
      return parse_literal_string();
    }
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  json parse_number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                         peek() == '+' || peek() == '-' || peek() == '.' ||
                         peek() == '_')) {
      ++pos_;
    }
    std::string token;
    for (char ch : text_.substr(start, pos_ - start)) {
      if (ch != '_') token.push_back(ch);
    }
    if (token.empty()) fail("expected a value");
    if (token.front() == '+') token.erase(0, 1);
    const bool is_float = token.find_first_of(".eE") != std::string::npos ||
                          token == "inf" || token == "-inf" || token == "nan";
    if (is_float) {
      double d = 0;
      auto [ptr, ec] =
          std::from_chars(token.data(), token.data() + token.size(), d);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        fail("invalid number '" + token + "'");
      }
      return d;
    }
    std::int64_t i = 0;
    auto [ptr, ec] =
        std::from_chars(token.data(), token.data() + token.size(), i);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail("invalid value '" + token + "'");
    }
    return i;
  }

  void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  void parse_escape(std::string& out) {
    ++pos_;  // backslash
    const char e = peek();
    ++pos_;
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'u':
      case 'U': {
        const std::size_t digits = e == 'u' ? 4 : 8;
        if (pos_ + digits > text_.size()) fail("truncated unicode escape");
        std::uint32_t cp = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_,
                                         text_.data() + pos_ + digits, cp, 16);
        if (ec != std::errc() || ptr != text_.data() + pos_ + digits) {
          fail("invalid unicode escape");
        }
        pos_ += digits;
        append_utf8(out, cp);
        break;
      }
      default:
        fail(std::string("invalid escape '\\") + e + "'");
    }
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      if (c == '"') {
        ++pos_;
        return out;
      }
      if (c == '\\') {
        parse_escape(out);
      } else {
        out.push_back(c);
        ++pos_;
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  std::string parse_multiline_basic() {
    pos_ += 3;
    if (peek() == '\n') ++pos_;
    std::string out;
    while (true) {
      if (at_end()) fail("unterminated multi-line string");
      if (text_.substr(pos_, 3) == "\"\"\"") {
        pos_ += 3;
        return out;
      }
      if (peek() == '\\') {
        const std::size_t save = pos_;
        ++pos_;
        skip_spaces();
        if (peek() == '\n' || peek() == '\r') {
          // Line-ending backslash trims the newline and leading whitespace.
          while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) {
            ++pos_;
          }
          continue;
        }
        pos_ = save;
        parse_escape(out);
      } else {
        out.push_back(peek());
        ++pos_;
      }
    }
  }

  std::string parse_multiline_literal() {
    pos_ += 3;
    if (peek() == '\n') ++pos_;
    const std::size_t end = text_.find("'''", pos_);
    if (end == std::string_view::npos) fail("unterminated multi-line string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 3;
    return out;
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_blank_lines();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_inline_table() {
    expect('{');
    json table = json::object();
    skip_spaces();
    if (peek() == '}') {
      ++pos_;
      return table;
    }
    while (true) {
      skip_spaces();
      parse_key_value(table);
      skip_spaces();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() == '}') {
        ++pos_;
        return table;
      } else {
        fail("expected ',' or '}' in inline table");
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) {
  return TomlParser(text).parse();
}

}  // namespace icr
