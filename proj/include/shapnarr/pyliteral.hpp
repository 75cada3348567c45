#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "shapnarr/errors.hpp"
#include "shapnarr/numfmt.hpp"

namespace shapnarr {

// Parses Python/JSON literal syntax as models write it: single or double
// quotes, None/True/False, trailing commas, tuples, bare-word keys, and
// unescaped apostrophes inside single-quoted strings. Key order is preserved.
class PyLiteralParser {
 public:
  explicit PyLiteralParser(std::string_view text) : s_(text) {}

  nlohmann::ordered_json parse() {
    auto v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after literal");
    return v;
  }

  // Keys that appeared more than once in some mapping; the first occurrence wins.
  const std::vector<std::string>& duplicate_keys() const { return duplicates_; }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::ParseError, why + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {  // python comment
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  nlohmann::ordered_json value() {
    if (++depth_ > 64) fail("nesting too deep");
    nlohmann::ordered_json v;
    const char c = peek();
    if (c == '{')
      v = mapping();
    else if (c == '[')
      v = sequence('[', ']');
    else if (c == '(')
      v = sequence('(', ')');
    else if (c == '\'' || c == '"')
      v = string_literal();
    else if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c)))
      v = number();
    else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      v = word();
    else
      fail(c ? std::string("unexpected character '") + c + "'" : "unexpected end of input");
    --depth_;
    return v;
  }

  nlohmann::ordered_json mapping() {
    ++pos_;  // {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    while (true) {
      char c = peek();
      if (c == '}') {
        ++pos_;
        return obj;
      }
      std::string key;
      if (c == '\'' || c == '"') {
        key = string_literal().get<std::string>();
      } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        key = bare_word();
      } else {
        fail("expected a mapping key");
      }
      if (peek() != ':') fail("expected ':' after key '" + key + "'");
      ++pos_;
      auto v = value();
      if (obj.contains(key))
        duplicates_.push_back(key);
      else
        obj[key] = std::move(v);
      c = peek();
      if (c == ',') {
        ++pos_;
      } else if (c != '}') {
        fail("expected ',' or '}' in mapping");
      }
    }
  }

  nlohmann::ordered_json sequence(char open, char close) {
    (void)open;
    ++pos_;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    while (true) {
      char c = peek();
      if (c == close) {
        ++pos_;
        return arr;
      }
      arr.push_back(value());
      c = peek();
      if (c == ',')
        ++pos_;
      else if (c != close)
        fail("expected ',' in sequence");
    }
  }

  bool closes_single_quoted(std::size_t at) const {
    // A quote is a terminator only if what follows could continue the literal.
    std::size_t j = at + 1;
    while (j < s_.size() && (s_[j] == ' ' || s_[j] == '\t' || s_[j] == '\r' || s_[j] == '\n')) ++j;
    if (j >= s_.size()) return true;
    const char n = s_[j];
    return n == ',' || n == ':' || n == '}' || n == ']' || n == ')';
  }

  nlohmann::ordered_json string_literal() {
    const char q = s_[pos_];
    const bool triple = s_.compare(pos_, 3, std::string(3, q)) == 0;
    pos_ += triple ? 3 : 1;
    std::string out;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      const char c = s_[pos_];
      if (triple) {
        if (s_.compare(pos_, 3, std::string(3, q)) == 0) {
          pos_ += 3;
          return out;
        }
      } else if (c == q) {
        if (q == '"' || closes_single_quoted(pos_)) {
          ++pos_;
          return out;
        }
        out += c;
        ++pos_;
        continue;
      }
      if (c == '\\' && pos_ + 1 < s_.size()) {
        const char e = s_[pos_ + 1];
        pos_ += 2;
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '\\': out += '\\'; break;
          case '\'': out += '\''; break;
          case '"': out += '"'; break;
          case 'u': out += unicode_escape(); break;
          default:
            out += '\\';
            out += e;
        }
        continue;
      }
      out += c;
      ++pos_;
    }
  }

  std::string unicode_escape() {
    if (pos_ + 4 > s_.size()) fail("short \\u escape");
    unsigned cp = 0;
    for (int i = 0; i < 4; ++i) {
      const char h = s_[pos_++];
      cp <<= 4;
      if (h >= '0' && h <= '9')
        cp |= static_cast<unsigned>(h - '0');
      else if (h >= 'a' && h <= 'f')
        cp |= static_cast<unsigned>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F')
        cp |= static_cast<unsigned>(h - 'A' + 10);
      else
        fail("bad \\u escape");
    }
    std::string out;
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
    return out;
  }

  nlohmann::ordered_json number() {
    const auto start = pos_;
    if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            ((s_[pos_] == '+' || s_[pos_] == '-') && (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    const auto text = s_.substr(start, pos_ - start);
    const auto lowered = [&] {
      std::string t(text);
      for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      return t;
    }();
    if (lowered == "-nan" || lowered == "+nan") return nullptr;
    auto v = parse_number(text);
    if (!v) fail("malformed number '" + std::string(text) + "'");
    const bool integral = text.find_first_of(".eE") == std::string_view::npos;
    if (integral && *v >= -9.0e15 && *v <= 9.0e15) return static_cast<std::int64_t>(*v);
    return *v;
  }

  std::string bare_word() {
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '.' || s_[pos_] == '-'))
      ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  nlohmann::ordered_json word() {
    const auto w = bare_word();
    if (w == "None" || w == "null" || w == "nan" || w == "NaN" || w == "none") return nullptr;
    if (w == "True" || w == "true") return true;
    if (w == "False" || w == "false") return false;
    return w;  // tolerated as a string
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  std::vector<std::string> duplicates_;
};

// Candidate spans holding a mapping literal: fenced blocks first, then each
// top-level balanced {...} in the raw text.
inline std::vector<std::string> mapping_candidates(std::string_view text) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while ((at = text.find("```", at)) != std::string_view::npos) {
    auto body_start = text.find('\n', at);
    if (body_start == std::string_view::npos) break;
    const auto close = text.find("```", body_start);
    if (close == std::string_view::npos) break;
    const auto body = text.substr(body_start + 1, close - body_start - 1);
    if (body.find('{') != std::string_view::npos) out.emplace_back(trim(body));
    at = close + 3;
  }
  std::size_t i = 0;
  while ((i = text.find('{', i)) != std::string_view::npos) {
    int depth = 0;
    char quote = 0;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (quote) {
        if (c == '\\')
          ++j;
        else if (c == quote)
          quote = 0;
        continue;
      }
      if (c == '"') quote = c;  // apostrophes are too often prose to track
      if (c == '{') ++depth;
      if (c == '}' && --depth == 0) break;
    }
    if (j >= text.size()) {
      out.emplace_back(text.substr(i));
      break;
    }
    out.emplace_back(text.substr(i, j - i + 1));
    i = j + 1;
  }
  return out;
}

}  // namespace shapnarr
