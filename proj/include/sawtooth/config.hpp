#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sawtooth {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Sectioned key-value run configuration:
///
///   #sawtooth-config v1
///   [section]
///   key = value
///
/// Commands pull typed values through the getters; every problem (bad type,
/// out-of-range value, missing required key) is recorded rather than thrown.
/// finish() then also flags every key the command never asked for and throws
/// one ConfigError listing all violations.
class RunConfig {
 public:
  static RunConfig parse(std::istream& in, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_entries(std::map<std::string, std::string> entries);

  bool has(const std::string& key) const;
  /// Overrides or adds an entry (command-line overrides).
  void set(const std::string& key, std::string value);
  /// Raw entries whose key starts with "<section>.", keyed without the prefix.
  /// Marks them as consumed.
  std::map<std::string, std::string> section(const std::string& name);

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  std::string get_choice(const std::string& key, const std::string& fallback,
                         const std::vector<std::string>& choices);
  long long get_int(const std::string& key, long long fallback, long long min, long long max);
  double get_double(const std::string& key, double fallback, double min, double max);
  bool get_bool(const std::string& key, bool fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);

  void add_violation(std::string message);
  const std::vector<std::string>& violations() const noexcept { return violations_; }
  /// Throws ConfigError if anything was violated or left unread.
  void finish();

 private:
  std::optional<std::string> lookup(const std::string& key);

  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
  std::vector<std::string> violations_;
};

}  // namespace sawtooth
