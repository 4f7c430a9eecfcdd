#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "histo/imaging/raster.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/patches/grid.hpp"

namespace histo {

enum class MaskScope { kFullResolutionGrid, kOnePixelPerPatch };

/// Binary foreground raster (1 = tissue). With kOnePixelPerPatch each pixel
/// stands for one planned grid center, in the grid's row-major order.
struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  double resolution = 1.0;
  MaskScope scope = MaskScope::kFullResolutionGrid;

  bool foreground(int x, int y) const noexcept {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::size_t foreground_count() const noexcept;
  friend bool operator==(const TissueMask&, const TissueMask&) = default;
};

using kern::Histogram256;

/// Otsu's threshold t: class 0 is bins [0, t], class 1 is (t, 255]. Returns
/// the t maximizing between-class variance, smallest t on ties.
int otsu_threshold(const Histogram256& histogram);

/// Between-class variance for threshold t, from the class counts and sums.
double between_class_variance(const Histogram256& histogram, int t);

/// 8-bit hexcone saturation of an RGB image as a 1-channel raster.
RasterImage saturation_image(const RasterImage& rgb);

Histogram256 saturation_histogram(const RasterImage& rgb);

struct MaskOptions {
  /// Replaces Otsu with a fixed saturation threshold when set.
  std::optional<int> fixed_threshold;
};

/// Saturation > threshold marks foreground.
TissueMask compute_mask(const RasterImage& rgb, const MaskOptions& options = {});

/// One mask pixel per grid center: the low-resolution saturation raster is
/// bilinearly interpolated at each center, then thresholded with the
/// image-level threshold. `level0_resolution_um` maps grid coordinates into
/// the low-resolution raster.
TissueMask coarse_mask_for_grid(const RasterImage& rgb_lowres, const GridSpec& grid,
                                double level0_resolution_um, const MaskOptions& options = {});

/// Foreground share of `rect` after clipping it to the mask.
double patch_foreground_fraction(const TissueMask& mask, PixelRect rect);

inline constexpr double kMinForegroundFraction = 0.2;

/// A patch is background when at least 80% of its pixels are background, so
/// it is kept only when the foreground share strictly exceeds 0.2.
constexpr bool keeps_patch(double foreground_fraction,
                           double min_fraction = kMinForegroundFraction) noexcept {
  return foreground_fraction > min_fraction;
}

/// Masks persist as 8-bit grayscale PNG (0/255) plus a sidecar holding
/// resolution and scope.
void save_mask(const std::filesystem::path& path, const TissueMask& mask);
TissueMask load_mask(const std::filesystem::path& path);

}  // namespace histo
