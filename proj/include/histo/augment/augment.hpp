#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histo/imaging/ops.hpp"
#include "histo/imaging/raster.hpp"
#include "histo/rng.hpp"

namespace histo {

/// Maximum absolute color deltas. Brightness is a fraction of full scale, hue
/// a fraction of the hue circle; saturation and contrast are relative.
struct ColorJitter {
  double brightness = 64.0 / 255.0;
  double saturation = 0.25;
  double hue = 0.04;
  double contrast = 0.75;

  friend bool operator==(const ColorJitter&, const ColorJitter&) = default;
};

struct AugmentationConfig {
  bool rotate = true;
  bool flips = true;
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  double shift_fraction_max = 0.5;
  FillPolicy fill = FillPolicy::kNearestEdge;
  ColorJitter color;
  std::uint64_t seed = 0;

  void validate() const;
  /// Every range degenerate: draws always yield the identity sample.
  static AugmentationConfig identity();

  friend bool operator==(const AugmentationConfig&, const AugmentationConfig&) = default;
};

/// One reified random draw.
struct AugmentationSample {
  double angle = 0.0;  // degrees
  bool flip_h = false;
  bool flip_v = false;
  double scale = 1.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  double brightness = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
  double contrast = 0.0;

  bool geometric_identity() const noexcept;
  bool color_identity() const noexcept;
  friend bool operator==(const AugmentationSample&, const AugmentationSample&) = default;
};

/// Draw order: angle, flip_h, flip_v, scale, shift_x, shift_y, brightness,
/// saturation, hue, contrast. Disabled features consume no draws.
AugmentationSample draw_sample(const AugmentationConfig& config, Rng& rng, int width, int height);

/// Scale, rotate, flip and shift about the image center, composed into a
/// single bilinear inverse mapping, then color jitter. Output size equals
/// input size.
RasterImage apply(const RasterImage& image, const AugmentationSample& sample,
                  FillPolicy fill = FillPolicy::kNearestEdge,
                  const EnclosingRaster* context = nullptr);

RasterImage apply_geometry(const RasterImage& image, const AugmentationSample& sample,
                           FillPolicy fill = FillPolicy::kNearestEdge,
                           const EnclosingRaster* context = nullptr);

/// Brightness, saturation, hue, contrast; clamped after each stage.
RasterImage apply_color(const RasterImage& image, const AugmentationSample& sample);

/// Substream seed for sample `id` in `stream` (e.g. the training epoch).
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t id) noexcept {
  return derive_seed(seed, stream, id);
}

struct AugmentedBatch {
  std::vector<FloatImage> images;
  std::vector<AugmentationSample> samples;
  std::vector<std::uint64_t> substreams;
};

/// Per patch: draw_sample on its own substream, apply, normalize. `ids`
/// names each patch's substream (defaults to its batch position); `contexts`
/// is required for source_context fill, one per patch.
AugmentedBatch augment_batch(std::span<const RasterImage> patches, const AugmentationConfig& config,
                             const DatasetStats& stats, std::uint64_t stream,
                             std::span<const std::uint64_t> ids = {},
                             std::span<const EnclosingRaster> contexts = {});

}  // namespace histo
