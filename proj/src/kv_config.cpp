#include "aloe/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace aloe {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> parts;
  std::string token;
  while (in >> token) parts.push_back(token);
  return parts;
}

std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

KeyValueConfig KeyValueConfig::parse(std::istream& in, std::string source_name) {
  KeyValueConfig cfg;
  cfg.source_ = std::move(source_name);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(cfg.source_, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(cfg.source_, line_no, "empty key");
    if (cfg.entries_.count(key)) throw ConfigError(cfg.source_, line_no, "duplicate key '" + key + "'");
    cfg.entries_[key] = Entry{value, line_no};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, std::string source_name) {
  std::istringstream in(text);
  return parse(in, std::move(source_name));
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  return parse(in, path.string());
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [key, entry] : entries_) {
    if (key.rfind(prefix, 0) == 0) out.push_back(key);
  }
  return out;
}

const KeyValueConfig::Entry& KeyValueConfig::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_, 0, "missing required key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

void KeyValueConfig::fail(const std::string& key, const std::string& message) const {
  const auto it = entries_.find(key);
  throw ConfigError(source_, it == entries_.end() ? 0 : it->second.line, key + ": " + message);
}

std::string KeyValueConfig::get_string(const std::string& key) const { return entry(key).value; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double lo, double hi) const {
  const auto v = parse_double(entry(key).value);
  if (!v) fail(key, "expected a real number, got '" + entry(key).value + "'");
  if (*v < lo || *v > hi) {
    fail(key, "value " + entry(key).value + " outside [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "]");
  }
  return *v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback, double lo,
                                  double hi) const {
  return has(key) ? get_double(key, lo, hi) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long lo, long long hi) const {
  const auto v = parse_int(entry(key).value);
  if (!v) fail(key, "expected an integer, got '" + entry(key).value + "'");
  if (*v < lo || *v > hi) {
    fail(key, "value " + entry(key).value + " outside [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "]");
  }
  return *v;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback, long long lo,
                                  long long hi) const {
  return has(key) ? get_int(key, lo, hi) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = entry(key).value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                std::size_t expected_count) const {
  std::vector<double> out;
  for (const auto& token : split_ws(entry(key).value)) {
    const auto v = parse_double(token);
    if (!v) fail(key, "expected real numbers, got '" + token + "'");
    out.push_back(*v);
  }
  if (expected_count != 0 && out.size() != expected_count) {
    fail(key, "expected " + std::to_string(expected_count) + " values, got " +
                  std::to_string(out.size()));
  }
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const auto& token : split_ws(entry(key).value)) {
    const auto v = parse_int(token);
    if (!v) fail(key, "expected integers, got '" + token + "'");
    out.push_back(static_cast<int>(*v));
  }
  return out;
}

void KeyValueConfig::finish() const {
  for (const auto& [key, e] : entries_) {
    if (!consumed_.count(key)) throw ConfigError(source_, e.line, "unknown key '" + key + "'");
  }
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = Entry{value, 0};
  } else {
    it->second.value = value;
  }
}

std::string KeyValueConfig::canonical_text() const {
  std::ostringstream out;
  for (const auto& [key, e] : entries_) out << key << " = " << e.value << '\n';
  return out.str();
}

}  // namespace aloe
