#pragma once

// Synthetic H&E-like slides for fixtures and tests. Each class has its own
// stroma tint and nucleus density/size, so a small network can separate them.

#include <cstdint>
#include <vector>

#include "histo/annotations/annotations.hpp"
#include "histo/imaging/raster.hpp"
#include "histo/rng.hpp"

namespace histo::synth {

/// Paints class texture into `image` inside `rect` (level-0 pixels).
void paint_texture(RasterImage& image, LabelClass label, PixelRect rect, Rng& rng);

/// Class texture of the given size at 0.467 um/px.
RasterImage texture_patch(LabelClass label, int size, Rng& rng, double resolution_um = 0.467);

struct SlideRecipe {
  int width = 1536;
  int height = 1536;
  double resolution_um = 0.467;
  /// Non-normal regions to place; each is an irregular polygon.
  int regions_per_class = 1;
  double region_radius = 170.0;
};

struct SyntheticSlide {
  RasterImage slide;
  AnnotationSet annotations;
};

/// Glass background, a normal-tissue body, and polygonal regions of the
/// other classes painted with their textures.
SyntheticSlide make_slide(const SlideRecipe& recipe, const std::string& slide_id,
                          std::uint64_t seed);

}  // namespace histo::synth
