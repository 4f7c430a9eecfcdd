#include <png.h>

#include <cstdio>
#include <memory>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"

namespace histo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  if (mode[0] == 'w' && path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) fail(ErrorKind::kIo, "cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw Error(ErrorKind::kFormat, std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

class PngWriter {
 public:
  explicit PngWriter(std::FILE* f) {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                   png_warning_handler);
    if (!png_) fail(ErrorKind::kIo, "png: cannot allocate writer");
    info_ = png_create_info_struct(png_);
    png_init_io(png_, f);
    png_set_compression_level(png_, 6);
  }
  ~PngWriter() { png_destroy_write_struct(&png_, &info_); }
  PngWriter(const PngWriter&) = delete;
  PngWriter& operator=(const PngWriter&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

  void write_rows(const std::uint8_t* data, int height, std::size_t stride) {
    png_write_info(png_, info_);
    for (int y = 0; y < height; ++y)
      png_write_row(png_, const_cast<png_bytep>(data + y * stride));
    png_write_end(png_, nullptr);
  }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngReader {
 public:
  explicit PngReader(std::FILE* f) {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                  png_warning_handler);
    if (!png_) fail(ErrorKind::kIo, "png: cannot allocate reader");
    info_ = png_create_info_struct(png_);
    png_init_io(png_, f);
    try {
      png_read_info(png_, info_);
    } catch (...) {
      png_destroy_read_struct(&png_, &info_, nullptr);
      throw;
    }
  }
  ~PngReader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

  std::vector<std::uint8_t> read_rows(int height, std::size_t stride) {
    std::vector<std::uint8_t> data(stride * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
    png_read_image(png_, rows.data());
    png_read_end(png_, nullptr);
    return data;
  }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

}  // namespace

void write_png(const std::filesystem::path& path, const RasterImage& image) {
  require(!image.empty(), "cannot write an empty image");
  auto f = open_file(path, "wb");
  PngWriter w(f.get());
  const int color = image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(w.png(), w.info(), image.width(), image.height(), 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  w.write_rows(image.data(), image.height(),
               static_cast<std::size_t>(image.width()) * image.channels());
}

DecodedImage decode_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  PngReader r(f.get());
  png_structp png = r.png();
  png_infop info = r.info();
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3)
    fail(ErrorKind::kFormat, path.string() + ": unsupported PNG channel layout");
  auto data = r.read_rows(height, static_cast<std::size_t>(width) * channels);
  return {RasterImage(width, height, channels, 1.0, std::move(data)), std::nullopt};
}

void write_indexed_png(const std::filesystem::path& path, const IndexedImage& image) {
  require(image.width > 0 && image.height > 0, "cannot write an empty image");
  require(!image.palette.empty() && image.palette.size() <= 256, "palette size out of range");
  auto f = open_file(path, "wb");
  PngWriter w(f.get());
  png_set_IHDR(w.png(), w.info(), image.width, image.height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> pal;
  for (const auto& c : image.palette) pal.push_back({c[0], c[1], c[2]});
  png_set_PLTE(w.png(), w.info(), pal.data(), static_cast<int>(pal.size()));
  w.write_rows(image.indices.data(), image.height, static_cast<std::size_t>(image.width));
}

IndexedImage read_indexed_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  PngReader r(f.get());
  png_structp png = r.png();
  png_infop info = r.info();
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_PALETTE)
    fail(ErrorKind::kFormat, path.string() + ": not a palette PNG");
  if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
  png_read_update_info(png, info);

  IndexedImage out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  png_colorp pal = nullptr;
  int n = 0;
  png_get_PLTE(png, info, &pal, &n);
  for (int i = 0; i < n; ++i) out.palette.push_back({pal[i].red, pal[i].green, pal[i].blue});
  out.indices = r.read_rows(out.height, static_cast<std::size_t>(out.width));
  return out;
}

}  // namespace histo
