#include "fpc/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "fpc/errors.hpp"

namespace fpc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool plain_double(const std::string& t, double& out) {
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return errno == 0 && end == t.c_str() + t.size();
}

bool valid_key(const std::string& k) {
  const auto dot = k.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == k.size()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

}  // namespace

double parse_number(const std::string& text) {
  const std::string t = trim(text);
  double v;
  if (plain_double(t, v)) {
    if (!std::isfinite(v)) throw ConfigError("not a finite number: '" + t + "'");
    return v;
  }
  const auto slash = t.find('/');
  double a, b;
  if (slash != std::string::npos && plain_double(trim(t.substr(0, slash)), a) &&
      plain_double(trim(t.substr(slash + 1)), b) && b != 0.0 && std::isfinite(a / b))
    return a / b;
  throw ConfigError("not a number: '" + t + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) return {};
  for (const auto& item : out)
    if (item.empty()) throw ConfigError("empty item in list '" + text + "'");
  return out;
}

Interval parse_interval(const std::string& text) {
  const std::string t = trim(text);
  // the separator is the first ':' (numbers never contain one)
  const auto colon = t.find(':');
  if (colon == std::string::npos) throw ConfigError("interval must be lo:hi, got '" + t + "'");
  const double lo = parse_number(t.substr(0, colon)), hi = parse_number(t.substr(colon + 1));
  if (!(lo < hi)) throw ConfigError("empty interval '" + t + "'");
  return {lo, hi};
}

Config Config::parse(std::istream& is, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line) + ": expected 'section.key = value'", line);
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError(source + ":" + std::to_string(line) + ": malformed key '" + key + "'", line);
    if (c.entries_.count(key))
      throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                            std::to_string(c.entries_[key].line) + ")",
                        line);
    c.entries_[key] = {value, line};
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse(is, path);
}

void Config::set(const std::string& key, const std::string& value, int line) {
  if (!valid_key(key)) throw ConfigError("malformed key '" + key + "'", line);
  entries_[key] = {trim(value), line};
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

int Config::line_of(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

const Config::Entry* Config::find(const std::string& key) const {
  used_[key] = true;
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Config::fail(const std::string& key, const std::string& what) const {
  const int line = line_of(key);
  const std::string where = line > 0 ? source_ + ":" + std::to_string(line) : "--" + key;
  throw ConfigError(where + ": " + key + ": " + what, line);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  try {
    return parse_number(e->value);
  } catch (const ConfigError& err) {
    fail(key, err.what());
  }
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(e->value.c_str(), &end, 10);
  if (errno != 0 || e->value.empty() || end != e->value.c_str() + e->value.size())
    fail(key, "not an integer: '" + e->value + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  const auto& v = e->value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(key, "not a boolean: '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  try {
    for (const auto& item : split_list(e->value)) out.push_back(parse_number(item));
  } catch (const ConfigError& err) {
    fail(key, err.what());
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key,
                                             const std::vector<std::string>& fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  try {
    return split_list(e->value);
  } catch (const ConfigError& err) {
    fail(key, err.what());
  }
}

std::vector<Interval> Config::get_intervals(const std::string& key, const std::vector<Interval>& fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<Interval> out;
  try {
    for (const auto& item : split_list(e->value)) out.push_back(parse_interval(item));
  } catch (const ConfigError& err) {
    fail(key, err.what());
  }
  return out;
}

void Config::reject_unused() const {
  for (const auto& [key, e] : entries_)
    if (!used_.count(key)) fail(key, "unknown key for this command");
}

}  // namespace fpc
