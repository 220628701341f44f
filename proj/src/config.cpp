#include "uwsplat/config.hpp"

#include <charconv>
#include <limits>
#include <fstream>
#include <sstream>

#include "uwsplat/errors.hpp"

namespace uwsplat {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s == "inf" || s == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
  KeyValueFile kv;
  kv.source_ = std::move(source);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw DataError(kv.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw DataError(kv.source_ + ":" + std::to_string(line_no) + ": empty key");
    if (kv.entries_.count(key))
      throw DataError(kv.source_ + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv.entries_[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

const KeyValueFile::Entry& KeyValueFile::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw DataError(source_ + ": missing key '" + key + "'");
  used_.insert(key);
  return it->second;
}

void KeyValueFile::fail(const Entry& e, const std::string& key, const std::string& what) const {
  throw DataError(source_ + ":" + std::to_string(e.line) + ": '" + key + "' " + what);
}

std::string KeyValueFile::get_string(const std::string& key) const { return require(key).value; }

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  return contains(key) ? get_string(key) : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  const Entry& e = require(key);
  double v = 0.0;
  if (!parse_number(e.value, v)) fail(e, key, "is not a number: " + e.value);
  return v;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

long long KeyValueFile::get_int(const std::string& key, long long fallback) const {
  if (!contains(key)) return fallback;
  const Entry& e = require(key);
  long long v = 0;
  const std::string_view s = trim(e.value);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(e, key, "is not an integer: " + e.value);
  return v;
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  if (!contains(key)) return fallback;
  const Entry& e = require(key);
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  fail(e, key, "is not a boolean: " + e.value);
}

std::vector<double> KeyValueFile::get_doubles(const std::string& key, std::size_t n) const {
  const Entry& e = require(key);
  std::vector<double> out;
  std::istringstream in(e.value);
  std::string tok;
  while (in >> tok) {
    double v = 0.0;
    if (!parse_number(tok, v)) fail(e, key, "has a non-numeric entry: " + tok);
    out.push_back(v);
  }
  if (out.size() != n) fail(e, key, "needs " + std::to_string(n) + " values, got " + std::to_string(out.size()));
  return out;
}

std::vector<std::string> KeyValueFile::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace uwsplat
