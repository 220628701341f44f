#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace uwsplat {

/// Flat "key = value" text with '#' comments. Malformed lines and bad values
/// raise DataError naming the source and line.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, std::string source = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace-separated list of exactly n numbers.
  std::vector<double> get_doubles(const std::string& key, std::size_t n) const;

  /// Keys present in the file that no getter has asked for.
  std::vector<std::string> unused_keys() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& require(const std::string& key) const;
  [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& what) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace uwsplat
