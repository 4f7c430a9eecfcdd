#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace histo::text {

/// Shortest decimal that round-trips to the same double.
std::string format_real(double value);

std::string_view trim(std::string_view s) noexcept;

std::vector<std::string_view> split(std::string_view s, char sep);

double parse_real(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);

/// FNV-1a 64-bit; used for content-addressed payload names and config hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Flat `key=value` document with a versioned header line, used for sidecar
/// metadata next to rasters.
struct KeyValueDoc {
  std::string header;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.contains(key); }
  const std::string& get(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
};

KeyValueDoc parse_key_value(std::string_view contents, std::string_view expected_header);
std::string render_key_value(const KeyValueDoc& doc);

}  // namespace histo::text
