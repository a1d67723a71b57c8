#pragma once

// Human-readable key-value configuration files.
//
//   # comment
//   env.max_steps = 300
//   env.unsafe.0  = 0.45 0.30 0.60 0.70
//
// Every getter records the key as consumed; `finish()` rejects any key that
// was never read, so typos surface as errors with their line number.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace aloe {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, std::string source_name = "<config>");
  static KeyValueConfig parse_string(const std::string& text, std::string source_name = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double lo, double hi) const;
  double get_double(const std::string& key, double fallback, double lo, double hi) const;
  long long get_int(const std::string& key, long long lo, long long hi) const;
  long long get_int(const std::string& key, long long fallback, long long lo, long long hi) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::size_t expected_count = 0) const;
  std::vector<int> get_ints(const std::string& key) const;

  /// Throws ConfigError for the first key that no getter consumed.
  void finish() const;

  /// Set or override a value (used for CLI overrides such as --seed).
  void set(const std::string& key, const std::string& value);

  /// The key-value text of every entry, sorted by key.
  std::string canonical_text() const;
  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& entry(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

}  // namespace aloe
