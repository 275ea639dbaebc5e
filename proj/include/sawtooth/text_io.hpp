#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sawtooth {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);
std::optional<std::uint64_t> parse_uint64(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char delimiter);

/// Writes through `fill` into a sibling temporary file, then renames it over
/// `path`. On any exception the temporary is removed and `path` is untouched.
/// Missing parent directories are created.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& fill);

/// FNV-1a over the raw bytes of the doubles; used for regression checksums.
std::uint64_t checksum(const std::vector<double>& values);
std::uint64_t checksum(const double* values, std::size_t count);
std::string to_hex(std::uint64_t value);

}  // namespace sawtooth
