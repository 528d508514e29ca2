#pragma once

// Reader for the small TOML subset used by experiment configs:
//   [section]            one level of tables
//   key = value          numbers, "strings", true/false, flat [arrays]
//                        (arrays may span lines)
//   # comment            to end of line
// Keys outside any section go to the section "".

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cellfit::cli {

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue {
  std::variant<double, bool, std::string, TomlArray> value;
  int line = 0;
};

class TomlDocument {
 public:
  using Section = std::map<std::string, TomlValue>;

  static TomlDocument parse(const std::string& text);

  bool has_section(const std::string& section) const { return sections_.contains(section); }
  const TomlValue* find(const std::string& section, const std::string& key) const;

  std::optional<double> number(const std::string& section, const std::string& key) const;
  std::optional<std::uint64_t> integer(const std::string& section, const std::string& key) const;
  std::optional<bool> boolean(const std::string& section, const std::string& key) const;
  std::optional<std::string> string(const std::string& section, const std::string& key) const;
  std::optional<std::vector<double>> numbers(const std::string& section, const std::string& key) const;
  std::optional<std::vector<std::string>> strings(const std::string& section,
                                                  const std::string& key) const;

  // Keys present in the document but never looked up; used to reject typos.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, Section> sections_;
  mutable std::map<std::string, std::vector<std::string>> used_;
};

}  // namespace cellfit::cli
