#include "sawtooth/config.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

constexpr std::string_view kConfigTag = "#sawtooth-config v1";

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join(violations, "; ")), violations_(std::move(violations)) {}

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first_line = trim(std::string_view(text).substr(0, text.find('\n')));
  if (first_line != kConfigTag) {
    throw ConfigError({source + ": first line must be '" + std::string(kConfigTag) + "'"});
  }

  boost::property_tree::ptree tree;
  try {
    std::istringstream body(text);
    boost::property_tree::ini_parser::read_ini(body, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError({source + ":" + std::to_string(e.line()) + ": " + e.message()});
  }

  std::map<std::string, std::string> entries;
  std::vector<std::string> problems;
  for (const auto& [section, children] : tree) {
    if (children.empty()) {
      problems.push_back("key '" + section + "' outside of any [section]");
      continue;
    }
    for (const auto& [key, value] : children) {
      entries[section + "." + key] = std::string(trim(value.data()));
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return from_entries(std::move(entries));
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  return parse(in, path.string());
}

RunConfig RunConfig::from_entries(std::map<std::string, std::string> entries) {
  RunConfig cfg;
  cfg.entries_ = std::move(entries);
  return cfg;
}

bool RunConfig::has(const std::string& key) const { return entries_.contains(key); }

void RunConfig::set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

std::optional<std::string> RunConfig::lookup(const std::string& key) {
  consumed_.insert(key);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::string> RunConfig::section(const std::string& name) {
  std::map<std::string, std::string> out;
  const std::string prefix = name + ".";
  for (const auto& [key, value] : entries_) {
    if (key.starts_with(prefix)) {
      out[key.substr(prefix.size())] = value;
      consumed_.insert(key);
    }
  }
  return out;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
  return lookup(key).value_or(fallback);
}

std::string RunConfig::require_string(const std::string& key) {
  auto v = lookup(key);
  if (!v || v->empty()) {
    add_violation(key + ": required");
    return {};
  }
  return *v;
}

std::string RunConfig::get_choice(const std::string& key, const std::string& fallback,
                                  const std::vector<std::string>& choices) {
  auto v = lookup(key).value_or(fallback);
  for (const auto& c : choices) {
    if (v == c) return v;
  }
  add_violation(key + ": '" + v + "' is not one of " + join(choices, "|"));
  return fallback;
}

long long RunConfig::get_int(const std::string& key, long long fallback, long long min, long long max) {
  auto raw = lookup(key);
  if (!raw) return fallback;
  auto v = parse_int(*raw);
  if (!v) {
    add_violation(key + ": not an integer: '" + *raw + "'");
    return fallback;
  }
  if (*v < min || *v > max) {
    add_violation(key + ": " + std::to_string(*v) + " outside [" + std::to_string(min) + ", " +
                  std::to_string(max) + "]");
    return fallback;
  }
  return *v;
}

double RunConfig::get_double(const std::string& key, double fallback, double min, double max) {
  auto raw = lookup(key);
  if (!raw) return fallback;
  auto v = parse_double(*raw);
  if (!v) {
    add_violation(key + ": not a number: '" + *raw + "'");
    return fallback;
  }
  if (!(*v >= min && *v <= max)) {
    add_violation(key + ": " + format_double(*v) + " outside [" + format_double(min) + ", " +
                  format_double(max) + "]");
    return fallback;
  }
  return *v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) {
  auto raw = lookup(key);
  if (!raw) return fallback;
  if (*raw == "true" || *raw == "1" || *raw == "yes") return true;
  if (*raw == "false" || *raw == "0" || *raw == "no") return false;
  add_violation(key + ": not a boolean: '" + *raw + "'");
  return fallback;
}

std::uint64_t RunConfig::get_seed(const std::string& key, std::uint64_t fallback) {
  auto raw = lookup(key);
  if (!raw) return fallback;
  auto v = parse_uint64(*raw);
  if (!v) {
    add_violation(key + ": not an unsigned 64-bit integer: '" + *raw + "'");
    return fallback;
  }
  return *v;
}

void RunConfig::add_violation(std::string message) { violations_.push_back(std::move(message)); }

void RunConfig::finish() {
  auto all = violations_;
  for (const auto& [key, value] : entries_) {
    if (!consumed_.contains(key)) all.push_back(key + ": unknown key");
  }
  if (!all.empty()) throw ConfigError(std::move(all));
}

}  // namespace sawtooth
