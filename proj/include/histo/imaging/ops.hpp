#pragma once

#include <optional>
#include <span>
#include <vector>

#include "histo/imaging/raster.hpp"

namespace histo {

enum class ResampleMethod { kNearest, kBilinear };

enum class FillPolicy { kNearestEdge, kSourceContext };

/// Round-half-up of a positive real, the dimension rule for resampling.
int round_half_up(double value);

/// Output dimension of resampling `input_dim` pixels by `factor`.
int resampled_dimension(int input_dim, double factor);

/// Scale an image down (factor > 1) or up (factor < 1). Output dimensions are
/// round_half_up(input / factor) and the resolution is multiplied by factor.
/// Bilinear sampling clamps to the edge.
RasterImage resample(const RasterImage& image, double factor,
                     ResampleMethod method = ResampleMethod::kBilinear);

/// Resize to an explicit size. The resolution scales with the width ratio.
RasterImage resize(const RasterImage& image, int width, int height,
                   ResampleMethod method = ResampleMethod::kBilinear);

/// The larger raster a crop was cut from, with the crop source's top-left
/// corner at (origin_x, origin_y) in enclosing coordinates.
struct EnclosingRaster {
  const RasterImage* raster = nullptr;
  int origin_x = 0;
  int origin_y = 0;
};

/// Square crop of `size` pixels with top-left at center - size / 2. Pixels
/// outside `source` are clamped to its edge (kNearestEdge) or read from
/// `context` (kSourceContext), which itself clamps at its own border.
RasterImage crop_with_fill(const RasterImage& source, PixelPoint center, int size,
                           FillPolicy fill = FillPolicy::kNearestEdge,
                           const EnclosingRaster* context = nullptr);

/// Plain sub-rectangle copy with nearest-edge fill for any overhang.
RasterImage crop_rect(const RasterImage& source, PixelRect rect);

struct DatasetStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::size_t sample_count = 0;

  int channels() const noexcept { return static_cast<int>(mean.size()); }
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

/// Per-channel mean and population standard deviation over the union of all
/// pixels of all images. sample_count counts pixels per channel.
DatasetStats compute_dataset_stats(std::span<const RasterImage> images);
DatasetStats compute_dataset_stats(std::span<const FloatImage> images);

inline constexpr double kDefaultNormalizeEpsilon = 1e-7;

/// out = (in - mean) / max(std, epsilon), per channel.
FloatImage normalize(const RasterImage& image, const DatasetStats& stats,
                     double epsilon = kDefaultNormalizeEpsilon);
FloatImage normalize(const FloatImage& image, const DatasetStats& stats,
                     double epsilon = kDefaultNormalizeEpsilon);

/// Affine inverse of normalize.
FloatImage denormalize(const FloatImage& image, const DatasetStats& stats,
                       double epsilon = kDefaultNormalizeEpsilon);

// Pixel-level helpers shared by tissue masking and color jitter.

/// Hexcone saturation scaled to 0..255: (max - min) / max, 0 when max is 0.
std::uint8_t saturation8(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

struct Hsv {
  double h = 0.0;  // fraction of the hue circle, [0, 1)
  double s = 0.0;
  double v = 0.0;
};

Hsv rgb_to_hsv(double r, double g, double b) noexcept;
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) noexcept;

}  // namespace histo
