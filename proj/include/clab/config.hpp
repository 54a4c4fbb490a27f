#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace clab {

// Anything wrong with configuration input (as opposed to a failure while
// running an experiment).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat, line-oriented "key = value" settings. '#' starts a comment, keys may
// use dots for grouping (e.g. lm.hidden_dim), duplicates are rejected.
// Reads are tracked so callers can flag keys nothing consumed.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::filesystem::path& file);
  static ConfigMap parse_text(std::string_view text,
                              std::string source = "<memory>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, std::string fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated values, trimmed; empty items are an error
  std::vector<std::string> get_list(const std::string& key,
                                    std::vector<std::string> fallback) const;

  std::vector<std::string> unread_keys() const;
  // throws ConfigError naming the first key no getter ever asked for
  void fail_on_unread() const;

  // every key/value pair in key order (for echoing into manifests)
  std::vector<std::pair<std::string, std::string>> items() const;

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;

  const std::string* find(const std::string& key) const;
};

}  // namespace clab
