#include "clab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace clab {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), file.string());
}

ConfigMap ConfigMap::parse_text(std::string_view text, std::string source) {
  ConfigMap map;
  map.source_ = std::move(source);

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.size() - start
                                                         : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(map.source_ + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + std::string(line) +
                        "'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key)) {
      throw ConfigError(map.source_ + ":" + std::to_string(line_no) +
                        ": bad config key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError(map.source_ + ":" + std::to_string(line_no) +
                        ": empty value for key '" + key + "'");
    }
    if (!map.values_.emplace(key, value).second) {
      throw ConfigError(map.source_ + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
  }
  return map;
}

const std::string* ConfigMap::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  read_.insert(key);
  return &it->second;
}

bool ConfigMap::has(const std::string& key) const {
  return find(key) != nullptr;
}

std::string ConfigMap::get_string(const std::string& key,
                                  std::string fallback) const {
  const std::string* v = find(key);
  return v ? *v : std::move(fallback);
}

std::string ConfigMap::require_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError("missing required config key '" + key + "'");
  return *v;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  const char* begin = v->data();
  const char* end = begin + v->size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      *v + "'");
  }
  return out;
}

std::int64_t ConfigMap::get_int(const std::string& key,
                                std::int64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const char* begin = v->data();
  const char* end = begin + v->size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      *v + "'");
  }
  return out;
}

std::size_t ConfigMap::get_size(const std::string& key,
                                std::size_t fallback) const {
  const std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) {
    throw ConfigError("config key '" + key + "' must be nonnegative");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t ConfigMap::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const char* begin = v->data();
  const char* end = begin + v->size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key +
                      "': expected an unsigned integer, got '" + *v + "'");
  }
  return out;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" +
                    *v + "'");
}

std::vector<std::string> ConfigMap::get_list(
    const std::string& key, std::vector<std::string> fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= v->size()) {
    std::size_t comma = v->find(',', start);
    if (comma == std::string::npos) comma = v->size();
    const std::string item(trim(std::string_view(*v).substr(start, comma - start)));
    if (item.empty()) {
      throw ConfigError("config key '" + key + "': empty list item");
    }
    items.push_back(item);
    start = comma + 1;
  }
  return items;
}

std::vector<std::string> ConfigMap::unread_keys() const {
  std::vector<std::string> unread;
  for (const auto& [key, value] : values_) {
    if (!read_.contains(key)) unread.push_back(key);
  }
  return unread;
}

std::vector<std::pair<std::string, std::string>> ConfigMap::items() const {
  return {values_.begin(), values_.end()};
}

void ConfigMap::fail_on_unread() const {
  const std::vector<std::string> unread = unread_keys();
  if (!unread.empty()) {
    throw ConfigError("unknown config key '" + unread.front() + "' in " +
                      source_);
  }
}

}  // namespace clab
