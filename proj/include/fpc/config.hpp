#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "fpc/domain.hpp"

namespace fpc {

// Line-oriented `section.key = value` text. '#' starts a comment, lists are comma
// separated, intervals are written lo:hi and numbers may be fractions like 1/128.
// Errors carry the line of the offending entry (0 for command-line overrides).
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "config");
  static Config parse_file(const std::string& path);

  // Later calls win; line 0 marks an override.
  void set(const std::string& key, const std::string& value, int line = 0);
  bool has(const std::string& key) const;
  int line_of(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<Interval> get_intervals(const std::string& key, const std::vector<Interval>& fallback) const;

  // Throws ConfigError naming the first key that no getter has read.
  void reject_unused() const;

  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, bool> used_;
  std::string source_ = "config";
};

// Parsers shared with the command line; they throw ConfigError without a line.
double parse_number(const std::string& text);
std::vector<std::string> split_list(const std::string& text);
Interval parse_interval(const std::string& text);

}  // namespace fpc
