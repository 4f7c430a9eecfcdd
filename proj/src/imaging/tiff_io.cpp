#include <zlib.h>

#include <cmath>
#include <cstring>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"

namespace histo {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kXResolution = 282,
  kYResolution = 283,
  kPlanarConfig = 284,
  kResolutionUnit = 296,
  kPredictor = 317,
  kTileWidth = 322,
};

enum FieldType : std::uint16_t { kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kRational = 5 };

constexpr std::uint16_t kCompressionNone = 1;
constexpr std::uint16_t kCompressionDeflate = 8;
constexpr std::uint16_t kCompressionDeflateLegacy = 32946;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    u8(v & 0xFF);
    u8(v >> 8);
  }
  void u32(std::uint32_t v) {
    u16(v & 0xFFFF);
    u16(v >> 16);
  }
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void align2() {
    if (buf_.size() % 2) u8(0);
  }
  std::uint32_t pos() const { return static_cast<std::uint32_t>(buf_.size()); }
  void patch_u32(std::uint32_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {
    if (data_.size() < 8) bad("file too short");
    if (data_[0] == 'I' && data_[1] == 'I')
      big_ = false;
    else if (data_[0] == 'M' && data_[1] == 'M')
      big_ = true;
    else
      bad("missing byte-order mark");
    if (u16(2) != 42) bad("bad magic number");
  }

  std::uint8_t u8(std::size_t at) const {
    check(at, 1);
    return static_cast<std::uint8_t>(data_[at]);
  }
  std::uint16_t u16(std::size_t at) const {
    check(at, 2);
    const auto a = static_cast<std::uint8_t>(data_[at]);
    const auto b = static_cast<std::uint8_t>(data_[at + 1]);
    return big_ ? static_cast<std::uint16_t>(a << 8 | b) : static_cast<std::uint16_t>(b << 8 | a);
  }
  std::uint32_t u32(std::size_t at) const {
    const std::uint32_t a = u16(at);
    const std::uint32_t b = u16(at + 2);
    return big_ ? (a << 16 | b) : (b << 16 | a);
  }
  std::string_view slice(std::size_t at, std::size_t n) const {
    check(at, n);
    return std::string_view(data_).substr(at, n);
  }
  [[noreturn]] void bad(const std::string& why) const {
    fail(ErrorKind::kFormat, name_ + ": " + why);
  }

 private:
  void check(std::size_t at, std::size_t n) const {
    if (at + n > data_.size() || at + n < at) bad("truncated file");
  }
  std::string data_;
  std::string name_;
  bool big_ = false;
};

struct IfdEntry {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::uint32_t value_offset = 0;  // position of the value bytes in the file
};

std::uint32_t type_size(std::uint16_t type) {
  switch (type) {
    case kByte:
    case kAscii: return 1;
    case kShort: return 2;
    case kLong: return 4;
    case kRational: return 8;
    default: return 1;
  }
}

std::vector<std::uint32_t> read_uints(const ByteReader& r, const IfdEntry& e) {
  std::vector<std::uint32_t> out;
  const std::uint32_t sz = type_size(e.type);
  for (std::uint32_t i = 0; i < e.count; ++i) {
    const std::size_t at = e.value_offset + i * sz;
    if (e.type == kShort)
      out.push_back(r.u16(at));
    else if (e.type == kLong)
      out.push_back(r.u32(at));
    else if (e.type == kByte)
      out.push_back(r.u8(at));
    else
      r.bad("unexpected field type for integer tag");
  }
  return out;
}

std::string inflate_strip(const ByteReader& r, std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                            reinterpret_cast<const Bytef*>(compressed.data()),
                            static_cast<uLong>(compressed.size()));
  if (rc != Z_OK && rc != Z_BUF_ERROR) r.bad("corrupt deflate strip");
  out.resize(len);
  return out;
}

}  // namespace

void write_tiff(const std::filesystem::path& path, const RasterImage& image,
                TiffCompression compression) {
  require(!image.empty(), "cannot write an empty image");
  const std::size_t raw_size = image.size();
  std::string strip;
  if (compression == TiffCompression::kDeflate) {
    uLongf len = compressBound(static_cast<uLong>(raw_size));
    strip.resize(len);
    if (compress2(reinterpret_cast<Bytef*>(strip.data()), &len, image.data(),
                  static_cast<uLong>(raw_size), 6) != Z_OK)
      fail(ErrorKind::kIo, "deflate failed for " + path.string());
    strip.resize(len);
  } else {
    strip.assign(reinterpret_cast<const char*>(image.data()), raw_size);
  }

  const int spp = image.channels();
  ByteWriter w;
  w.bytes("II", 2);
  w.u16(42);
  const std::uint32_t ifd_ptr_at = w.pos();
  w.u32(0);

  const std::uint32_t strip_at = w.pos();
  w.bytes(strip.data(), strip.size());
  w.align2();

  std::uint32_t bps_at = 0;
  if (spp == 3) {
    bps_at = w.pos();
    for (int i = 0; i < 3; ++i) w.u16(8);
  }
  // Pixels per centimeter as a rational.
  std::uint32_t den = 10000;
  double ppcm = 1e4 / image.resolution();
  while (ppcm * den > 4.0e9 && den > 1) den /= 10;
  const std::uint32_t num = static_cast<std::uint32_t>(std::llround(ppcm * den));
  const std::uint32_t res_at = w.pos();
  w.u32(num);
  w.u32(den);

  w.align2();
  const std::uint32_t ifd_at = w.pos();
  w.patch_u32(ifd_ptr_at, ifd_at);

  struct Entry {
    std::uint16_t tag, type;
    std::uint32_t count, value;
  };
  const std::uint16_t comp =
      compression == TiffCompression::kDeflate ? kCompressionDeflate : kCompressionNone;
  std::vector<Entry> entries = {
      {kImageWidth, kLong, 1, static_cast<std::uint32_t>(image.width())},
      {kImageLength, kLong, 1, static_cast<std::uint32_t>(image.height())},
      {kBitsPerSample, kShort, static_cast<std::uint32_t>(spp), spp == 3 ? bps_at : 8u},
      {kCompression, kShort, 1, comp},
      {kPhotometric, kShort, 1, spp == 3 ? 2u : 1u},
      {kStripOffsets, kLong, 1, strip_at},
      {kSamplesPerPixel, kShort, 1, static_cast<std::uint32_t>(spp)},
      {kRowsPerStrip, kLong, 1, static_cast<std::uint32_t>(image.height())},
      {kStripByteCounts, kLong, 1, static_cast<std::uint32_t>(strip.size())},
      {kXResolution, kRational, 1, res_at},
      {kYResolution, kRational, 1, res_at},
      {kPlanarConfig, kShort, 1, 1},
      {kResolutionUnit, kShort, 1, 3},
  };
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const Entry& e : entries) {
    w.u16(e.tag);
    w.u16(e.type);
    w.u32(e.count);
    if (e.type == kShort && e.count == 1) {
      w.u16(static_cast<std::uint16_t>(e.value));
      w.u16(0);
    } else {
      w.u32(e.value);
    }
  }
  w.u32(0);
  text::write_file(path, w.str());
}

DecodedImage decode_tiff(const std::filesystem::path& path) {
  ByteReader r(text::read_file(path), path.string());
  const std::uint32_t ifd = r.u32(4);
  const std::uint16_t n = r.u16(ifd);
  std::map<std::uint16_t, IfdEntry> tags;
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::size_t at = ifd + 2 + 12u * i;
    IfdEntry e;
    const std::uint16_t tag = r.u16(at);
    e.type = r.u16(at + 2);
    e.count = r.u32(at + 4);
    e.value_offset = type_size(e.type) * e.count <= 4 ? static_cast<std::uint32_t>(at + 8)
                                                      : r.u32(at + 8);
    tags[tag] = e;
  }
  auto scalar = [&](std::uint16_t tag, std::uint32_t fallback) -> std::uint32_t {
    auto it = tags.find(tag);
    if (it == tags.end()) return fallback;
    return read_uints(r, it->second).at(0);
  };
  if (tags.contains(kTileWidth)) r.bad("tiled TIFF is not supported");
  if (!tags.contains(kImageWidth) || !tags.contains(kImageLength) ||
      !tags.contains(kStripOffsets) || !tags.contains(kStripByteCounts))
    r.bad("missing required tags");

  const int width = static_cast<int>(scalar(kImageWidth, 0));
  const int height = static_cast<int>(scalar(kImageLength, 0));
  const int spp = static_cast<int>(scalar(kSamplesPerPixel, 1));
  const std::uint32_t compression = scalar(kCompression, kCompressionNone);
  const std::uint32_t photometric = scalar(kPhotometric, spp == 3 ? 2 : 1);
  const std::uint32_t predictor = scalar(kPredictor, 1);
  if (tags.contains(kBitsPerSample))
    for (std::uint32_t b : read_uints(r, tags[kBitsPerSample]))
      if (b != 8) r.bad("only 8-bit samples are supported");
  if (spp != 1 && spp != 3) r.bad("only gray or RGB samples are supported");
  if (scalar(kPlanarConfig, 1) != 1) r.bad("planar TIFF is not supported");
  if (compression != kCompressionNone && compression != kCompressionDeflate &&
      compression != kCompressionDeflateLegacy)
    r.bad("unsupported compression " + std::to_string(compression));
  if (width <= 0 || height <= 0) r.bad("invalid dimensions");

  const std::uint32_t rows_per_strip = scalar(kRowsPerStrip, static_cast<std::uint32_t>(height));
  const auto offsets = read_uints(r, tags[kStripOffsets]);
  const auto counts = read_uints(r, tags[kStripByteCounts]);
  if (offsets.size() != counts.size()) r.bad("strip tables disagree");

  const std::size_t row_bytes = static_cast<std::size_t>(width) * spp;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(row_bytes * height);
  for (std::size_t s = 0; s < offsets.size(); ++s) {
    const std::size_t rows = std::min<std::size_t>(
        rows_per_strip, static_cast<std::size_t>(height) - s * rows_per_strip);
    const std::size_t expected = rows * row_bytes;
    std::string_view raw = r.slice(offsets[s], counts[s]);
    std::string decoded = compression == kCompressionNone ? std::string(raw.substr(0, expected))
                                                          : inflate_strip(r, raw, expected);
    if (decoded.size() != expected) r.bad("strip shorter than its rows");
    if (predictor == 2) {
      for (std::size_t y = 0; y < rows; ++y)
        for (std::size_t x = spp; x < row_bytes; ++x)
          decoded[y * row_bytes + x] = static_cast<char>(decoded[y * row_bytes + x] +
                                                         decoded[y * row_bytes + x - spp]);
    }
    pixels.insert(pixels.end(), decoded.begin(), decoded.end());
  }
  if (pixels.size() != row_bytes * height) r.bad("pixel data shorter than the image");
  if (photometric == 0)
    for (auto& p : pixels) p = static_cast<std::uint8_t>(255 - p);

  DecodedImage out{RasterImage(width, height, spp, 1.0, std::move(pixels)), std::nullopt};
  if (tags.contains(kXResolution) && tags[kXResolution].type == kRational) {
    const std::uint32_t at = tags[kXResolution].value_offset;
    const double num = r.u32(at);
    const double den = r.u32(at + 4);
    const std::uint32_t unit = scalar(kResolutionUnit, 2);
    if (num > 0 && den > 0) {
      const double per_unit = num / den;
      if (unit == 3)
        out.resolution_um = 1e4 / per_unit;
      else if (unit == 2)
        out.resolution_um = 25400.0 / per_unit;
    }
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& raster_path) {
  return raster_path.string() + ".meta";
}

void write_sidecar(const std::filesystem::path& raster_path, const text::KeyValueDoc& doc) {
  text::write_file(sidecar_path(raster_path), text::render_key_value(doc));
}

std::optional<text::KeyValueDoc> read_sidecar(const std::filesystem::path& raster_path) {
  const auto p = sidecar_path(raster_path);
  if (!std::filesystem::exists(p)) return std::nullopt;
  return text::parse_key_value(text::read_file(p), kSidecarHeader);
}

namespace {

bool is_tiff(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".tif" || ext == ".tiff";
}

}  // namespace

void write_raster(const std::filesystem::path& path, const RasterImage& image,
                  const std::map<std::string, std::string>& extra) {
  if (is_tiff(path))
    write_tiff(path, image);
  else
    write_png(path, image);
  text::KeyValueDoc doc{std::string(kSidecarHeader), extra};
  doc.values["resolution_um"] = text::format_real(image.resolution());
  write_sidecar(path, doc);
}

RasterImage read_raster(const std::filesystem::path& path,
                        std::optional<double> fallback_resolution_um) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing raster " + path.string());
  DecodedImage d = is_tiff(path) ? decode_tiff(path) : decode_png(path);
  std::optional<double> res;
  if (auto meta = read_sidecar(path); meta && meta->has("resolution_um"))
    res = meta->get_real("resolution_um");
  else if (d.resolution_um)
    res = d.resolution_um;
  else
    res = fallback_resolution_um;
  if (!res)
    fail(ErrorKind::kData, path.string() + ": no physical resolution (add a .meta sidecar)");
  d.image.set_resolution(*res);
  return std::move(d.image);
}

}  // namespace histo
