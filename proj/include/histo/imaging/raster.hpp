#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "histo/error.hpp"

namespace histo {

/// Row-major interleaved raster with an isotropic physical resolution in
/// micrometers per pixel. `Raster<std::uint8_t>` holds source data losslessly;
/// `Raster<float>` is the normalized network-facing form.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, int channels, double resolution_um)
      : width_(width), height_(height), channels_(channels), resolution_(resolution_um) {
    check_shape();
    pixels_.assign(size(), T{});
  }

  Raster(int width, int height, int channels, double resolution_um, std::vector<T> pixels)
      : width_(width),
        height_(height),
        channels_(channels),
        resolution_(resolution_um),
        pixels_(std::move(pixels)) {
    check_shape();
    require(pixels_.size() == size(), "raster pixel buffer length does not match its shape");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  double resolution() const noexcept { return resolution_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width_) * height_ * channels_;
  }

  void set_resolution(double resolution_um) {
    require(resolution_um > 0.0, "resolution must be positive");
    resolution_ = resolution_um;
  }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& at(int x, int y, int c = 0) noexcept { return pixels_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const noexcept { return pixels_[index(x, y, c)]; }

  std::span<T> pixels() noexcept { return pixels_; }
  std::span<const T> pixels() const noexcept { return pixels_; }
  T* data() noexcept { return pixels_.data(); }
  const T* data() const noexcept { return pixels_.data(); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  void check_shape() const {
    require(width_ > 0 && height_ > 0, "raster dimensions must be positive");
    require(channels_ == 1 || channels_ == 3, "raster must have 1 or 3 channels");
    require(resolution_ > 0.0, "resolution must be positive");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  double resolution_ = 1.0;
  std::vector<T> pixels_;
};

using RasterImage = Raster<std::uint8_t>;
using FloatImage = Raster<float>;

struct PixelPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Integer pixel rectangle, half-open: [x, x + width) × [y, y + height).
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  PixelRect clipped(int bound_w, int bound_h) const noexcept;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

}  // namespace histo
