#pragma once

#include <filesystem>
#include <optional>

#include "histo/imaging/raster.hpp"
#include "histo/kernels/kernels.hpp"
#include "histo/patches/grid.hpp"
#include "histo/segmentation/backend.hpp"
#include "histo/segmentation/label_map.hpp"
#include "histo/tissue/mask.hpp"

namespace histo {

struct SegmentConfig {
  double downsample = 4.5;
  int patch_pixel_px = 157;
  int stride = 32;
  int batch_size = 64;

  void validate() const;
};

/// Level-0 grid of classified centers: cell (i, j) is centered on classifier
/// pixel stride·i + stride/2, i.e. one cell per stride·downsample level-0
/// pixels. Rasterizing annotations on this grid gives the reference map.
GridSpec segmentation_grid(const RasterImage& slide, const SegmentConfig& config);

/// Downsamples the slide, classifies a patch around every grid center
/// (nearest-edge fill at the borders) and stores the argmax per cell. With a
/// full-resolution mask, cells whose footprint has no foreground become
/// normal without classification.
LabelMap segment(const RasterImage& slide, ClassifierBackend& backend, const SegmentConfig& config,
                 const std::string& slide_id = "", const TissueMask* mask = nullptr);

struct PostprocessConfig {
  int median_window = 5;
  int dilate_radius = 1;
  kern::MedianMode median_mode = kern::MedianMode::kOrdinal;

  void validate() const;
};

/// Ordinal-order median over a window×window neighborhood with edge
/// replication; the window must be odd.
LabelMap median_filter(const LabelMap& map, int window,
                       kern::MedianMode mode = kern::MedianMode::kOrdinal);

/// Grows every non-normal class by a cross of the given radius; overlaps go to
/// the higher class code (benign < in situ < invasive). Normal never grows.
LabelMap priority_dilate(const LabelMap& map, int radius);

/// median_filter, then priority_dilate.
LabelMap postprocess(const LabelMap& map, const PostprocessConfig& config);

/// Indexed PNG (0 white, 1 green, 2 blue, 3 red) plus a sidecar with the
/// stride, downsample factors and slide id.
void export_label_map(const std::filesystem::path& path, const LabelMap& map);

/// Rejects unknown palette colors; when given, the sidecar's total
/// downsample must match `expected_total_downsample`.
LabelMap import_label_map(const std::filesystem::path& path,
                          std::optional<double> expected_total_downsample = std::nullopt);

}  // namespace histo
