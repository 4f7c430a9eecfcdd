#include "histo/text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "histo/error.hpp"

namespace histo::text {

std::string format_real(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorKind::kFormat, "cannot format real value");
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) noexcept {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_real(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::kFormat, "invalid number for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorKind::kFormat, "invalid integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

const std::string& KeyValueDoc::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) fail(ErrorKind::kFormat, "missing key '" + key + "'");
  return it->second;
}

double KeyValueDoc::get_real(const std::string& key) const { return parse_real(get(key), key); }

std::int64_t KeyValueDoc::get_int(const std::string& key) const { return parse_int(get(key), key); }

KeyValueDoc parse_key_value(std::string_view contents, std::string_view expected_header) {
  KeyValueDoc doc;
  bool first = true;
  for (auto raw : split(contents, '\n')) {
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (first) {
      doc.header = std::string(line);
      if (!expected_header.empty() && line != expected_header)
        fail(ErrorKind::kFormat, "unexpected header '" + std::string(line) + "', expected '" +
                                     std::string(expected_header) + "'");
      first = false;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::kFormat, "malformed line '" + std::string(line) + "'");
    doc.values[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  if (first) fail(ErrorKind::kFormat, "empty document");
  return doc;
}

std::string render_key_value(const KeyValueDoc& doc) {
  std::string out = doc.header + "\n";
  for (const auto& [k, v] : doc.values) out += k + "=" + v + "\n";
  return out;
}

}  // namespace histo::text
