#include "cellfit/cli/toml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cellfit/errors.hpp"

namespace cellfit::cli {

namespace {

class LineParser {
 public:
  LineParser(const std::string& text, int line) : s_(text), line_(line) {}

  TomlValue value() {
    skip_space();
    if (pos_ >= s_.size()) fail("missing value");
    TomlValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.value = quoted();
    } else if (c == '[') {
      ++pos_;
      TomlArray arr;
      skip_space();
      while (pos_ < s_.size() && s_[pos_] != ']') {
        TomlValue item = value();
        if (std::holds_alternative<TomlArray>(item.value)) fail("nested arrays are not supported");
        arr.push_back(std::move(item));
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          skip_space();
        } else if (pos_ < s_.size() && s_[pos_] != ']') {
          fail("expected ',' or ']' in array");
        }
      }
      if (pos_ >= s_.size()) fail("unterminated array");
      ++pos_;
      v.value = std::move(arr);
    } else {
      std::size_t end = pos_;
      while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != '#' &&
             !std::isspace(static_cast<unsigned char>(s_[end]))) {
        ++end;
      }
      std::string token = s_.substr(pos_, end - pos_);
      pos_ = end;
      if (token == "true" || token == "false") {
        v.value = token == "true";
      } else {
        std::erase(token, '_');
        double d = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), d);
        if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
          fail("cannot read value '" + token + "'");
        }
        v.value = d;
      }
    }
    return v;
  }

  void expect_end() {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected text after value");
  }

 private:
  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        const char e = s_[++pos_];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += s_[pos_];
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(line_), what);
  }

  const std::string& s_;
  int line_;
  std::size_t pos_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment and reports the [ ] nesting change, both outside strings.
std::string strip_comment(const std::string& s, int& depth) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return s.substr(0, i);
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return s;
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

}  // namespace

TomlDocument TomlDocument::parse(const std::string& text) {
  TomlDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  doc.sections_[""];
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') {
      const auto close = s.find(']');
      if (close == std::string::npos) throw ParseError("line " + std::to_string(line), "missing ']'");
      section = trim(s.substr(1, close - 1));
      if (section.empty()) throw ParseError("line " + std::to_string(line), "empty section name");
      const std::string rest = trim(s.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') {
        throw ParseError("line " + std::to_string(line), "unexpected text after section header");
      }
      if (doc.sections_.contains(section)) {
        throw ParseError("line " + std::to_string(line), "section [" + section + "] repeated");
      }
      doc.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(line), "expected key = value");
    std::string key = trim(s.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw ParseError("line " + std::to_string(line), "empty key");
    // Arrays may continue over several lines until the brackets balance.
    const int first_line = line;
    int depth = 0;
    std::string rhs = strip_comment(s.substr(eq + 1), depth);
    while (depth > 0 && std::getline(in, raw)) {
      ++line;
      rhs += " " + strip_comment(raw, depth);
    }
    LineParser p(rhs, first_line);
    TomlValue v = p.value();
    p.expect_end();
    auto& sec = doc.sections_[section];
    if (sec.contains(key)) {
      throw ParseError("line " + std::to_string(line), "key '" + where(section, key) + "' repeated");
    }
    sec.emplace(key, std::move(v));
  }
  return doc;
}

const TomlValue* TomlDocument::find(const std::string& section, const std::string& key) const {
  used_[section].push_back(key);
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

namespace {

[[noreturn]] void type_error(const TomlValue& v, const std::string& section, const std::string& key,
                             const std::string& expected) {
  throw ParseError("line " + std::to_string(v.line), where(section, key) + ": expected " + expected);
}

}  // namespace

std::optional<double> TomlDocument::number(const std::string& section, const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  if (const double* d = std::get_if<double>(&v->value)) return *d;
  type_error(*v, section, key, "a number");
}

std::optional<std::uint64_t> TomlDocument::integer(const std::string& section,
                                                   const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  const double* d = std::get_if<double>(&v->value);
  if (!d || *d < 0 || std::floor(*d) != *d || *d > 9.007199254740992e15) {
    type_error(*v, section, key, "a non-negative integer");
  }
  return static_cast<std::uint64_t>(*d);
}

std::optional<bool> TomlDocument::boolean(const std::string& section, const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  if (const bool* b = std::get_if<bool>(&v->value)) return *b;
  type_error(*v, section, key, "true or false");
}

std::optional<std::string> TomlDocument::string(const std::string& section,
                                                const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  if (const std::string* s = std::get_if<std::string>(&v->value)) return *s;
  type_error(*v, section, key, "a quoted string");
}

std::optional<std::vector<double>> TomlDocument::numbers(const std::string& section,
                                                         const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  const TomlArray* arr = std::get_if<TomlArray>(&v->value);
  if (!arr) type_error(*v, section, key, "an array of numbers");
  std::vector<double> out;
  for (const TomlValue& item : *arr) {
    const double* d = std::get_if<double>(&item.value);
    if (!d) type_error(*v, section, key, "an array of numbers");
    out.push_back(*d);
  }
  return out;
}

std::optional<std::vector<std::string>> TomlDocument::strings(const std::string& section,
                                                              const std::string& key) const {
  const TomlValue* v = find(section, key);
  if (!v) return std::nullopt;
  const TomlArray* arr = std::get_if<TomlArray>(&v->value);
  if (!arr) type_error(*v, section, key, "an array of strings");
  std::vector<std::string> out;
  for (const TomlValue& item : *arr) {
    const std::string* s = std::get_if<std::string>(&item.value);
    if (!s) type_error(*v, section, key, "an array of strings");
    out.push_back(*s);
  }
  return out;
}

std::vector<std::string> TomlDocument::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [section, keys] : sections_) {
    const auto& used = used_[section];
    for (const auto& [key, value] : keys) {
      if (std::find(used.begin(), used.end(), key) == used.end()) out.push_back(where(section, key));
    }
  }
  return out;
}

}  // namespace cellfit::cli
