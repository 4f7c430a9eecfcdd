#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "histo/annotations/annotations.hpp"
#include "histo/imaging/raster.hpp"
#include "histo/patches/grid.hpp"
#include "histo/patches/manifest.hpp"
#include "histo/tissue/mask.hpp"

namespace histo {

enum class BackgroundRule {
  kPatchLevel,  // foreground share of each patch footprint in a full mask
  kCoarseGrid,  // one mask pixel per grid center
  kNone,
};

struct ExtractionConfig {
  double patch_physical_um = 330.0;
  int patch_pixel_px = 157;
  /// Center spacing in level-0 pixels; defaults to the level-0 patch size.
  std::optional<double> spacing_level0;
  /// When set, the grid origin is shifted by a random integer offset in
  /// [0, spacing) derived from this seed and the slide id.
  std::optional<std::uint64_t> offset_seed;
  BackgroundRule background = BackgroundRule::kPatchLevel;
  double min_foreground_fraction = kMinForegroundFraction;
  UnannotatedPolicy unannotated = UnannotatedPolicy::kNormal;
  /// Extra pixels on every side of a context payload; 0 disables it.
  int context_margin_px = 0;
  /// Reject extraction without an annotation set.
  bool require_annotations = false;
};

struct ExtractedPatch {
  PatchRecord record;
  RasterImage image;
  std::optional<RasterImage> context;
};

struct Extraction {
  GridSpec grid;
  double downsample = 1.0;
  std::size_t planned = 0;
  std::size_t discarded_background = 0;
  std::size_t discarded_unannotated = 0;
  int context_margin_px = 0;
  std::vector<ExtractedPatch> patches;

  /// Manifest of the kept patches, in grid order.
  DatasetManifest manifest() const;
};

/// Level-0 -> classifier downsample; throws when the patch pixel size would
/// need upsampling.
double extraction_downsample(const ExtractionConfig& config, double level0_resolution_um);

GridSpec extraction_grid(const RasterImage& slide, const ExtractionConfig& config,
                         const std::string& slide_id);

/// Plans the grid, labels centers, drops background, crops each footprint and
/// resamples it to patch_pixel_px. Records have empty payload paths until
/// written by `write_payloads`.
Extraction extract_patches(const RasterImage& slide, const std::string& slide_id,
                           const ExtractionConfig& config,
                           const AnnotationSet* annotations = nullptr,
                           const TissueMask* mask = nullptr);

/// Writes patches as content-addressed PNGs under `root/patches/` and fills
/// the record paths.
void write_payloads(Extraction& extraction, const std::filesystem::path& root);

}  // namespace histo
