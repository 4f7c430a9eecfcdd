#include "histo/segmentation/segment.hpp"

#include <cmath>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/text.hpp"

namespace histo {

void SegmentConfig::validate() const {
  require(downsample >= 1.0, "segmentation downsample must be >= 1");
  require(patch_pixel_px > 0, "patch size must be positive");
  require(stride > 0, "grid stride must be positive");
  require(batch_size > 0, "batch size must be positive");
}

void PostprocessConfig::validate() const {
  require(median_window >= 1 && median_window % 2 == 1, "median window must be odd and >= 1");
  require(dilate_radius >= 0, "dilation radius must be non-negative");
}

namespace {

int cells_along(int classifier_extent, int stride) { return (classifier_extent + stride - 1) / stride; }

}  // namespace

GridSpec segmentation_grid(const RasterImage& slide, const SegmentConfig& config) {
  config.validate();
  const int cw = resampled_dimension(slide.width(), config.downsample);
  const int ch = resampled_dimension(slide.height(), config.downsample);
  const double spacing = config.stride * config.downsample;
  GridSpec g;
  g.extent = {0.0, 0.0, cells_along(cw, config.stride) * spacing,
              cells_along(ch, config.stride) * spacing};
  g.spacing = spacing;
  g.origin_offset = {(config.stride / 2) * config.downsample, (config.stride / 2) * config.downsample};
  g.patch_size_level0 = config.patch_pixel_px * config.downsample;
  g.validate();
  return g;
}

LabelMap segment(const RasterImage& slide, ClassifierBackend& backend, const SegmentConfig& config,
                 const std::string& slide_id, const TissueMask* mask) {
  config.validate();
  const auto meta = backend.metadata();
  const double expected_um = config.patch_pixel_px * config.downsample * slide.resolution();
  if (meta.patch_pixel_px != config.patch_pixel_px ||
      std::abs(meta.patch_physical_um - expected_um) > 1e-3 * expected_um)
    fail(ErrorKind::kData, "backend '" + meta.name + "' expects " + std::to_string(meta.patch_pixel_px) +
                               " px patches of " + text::format_real(meta.patch_physical_um) +
                               " um, segmentation produces " + std::to_string(config.patch_pixel_px) +
                               " px of " + text::format_real(expected_um) + " um");
  if (mask && mask->scope != MaskScope::kFullResolutionGrid)
    fail(ErrorKind::kData, "segmentation needs a full-resolution tissue mask");

  const RasterImage small = resample(slide, config.downsample);
  const GridSpec grid = segmentation_grid(slide, config);
  const int cols = cells_along(small.width(), config.stride);
  const int rows = cells_along(small.height(), config.stride);
  if (grid.columns() != cols || grid.rows() != rows)
    fail(ErrorKind::kInvalidArgument, "segmentation grid bookkeeping mismatch");

  LabelMap map(cols, rows);
  map.cell_stride_pixels = config.stride;
  map.classifier_downsample = config.downsample;
  map.total_downsample = config.stride * config.downsample;
  map.slide_id = slide_id;

  // Cells to classify, in row-major order.
  std::vector<std::pair<int, int>> todo;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) {
      if (mask) {
        const Point c = grid.center(i, j);
        const double scale = slide.resolution() / mask->resolution;
        const double half = grid.spacing / 2.0;
        const int x0 = static_cast<int>(std::floor((c.x - half) * scale));
        const int y0 = static_cast<int>(std::floor((c.y - half) * scale));
        const int x1 = static_cast<int>(std::ceil((c.x + half) * scale));
        const int y1 = static_cast<int>(std::ceil((c.y + half) * scale));
        if (patch_foreground_fraction(*mask, {x0, y0, x1 - x0, y1 - y0}) == 0.0) continue;
      }
      todo.emplace_back(i, j);
    }

  for (std::size_t begin = 0; begin < todo.size(); begin += config.batch_size) {
    const std::size_t end = std::min(todo.size(), begin + config.batch_size);
    PatchBatch batch;
    batch.patches.resize(end - begin);
    batch.centers_level0.resize(end - begin);
#pragma omp parallel for schedule(static)
    for (long k = 0; k < static_cast<long>(end - begin); ++k) {
      const auto [i, j] = todo[begin + k];
      const int half = config.stride / 2;
      batch.patches[k] = crop_with_fill(small, {config.stride * i + half, config.stride * j + half},
                                        config.patch_pixel_px);
      batch.centers_level0[k] = grid.center(i, j);
    }
    const auto probs = backend.classify(batch);
    if (probs.size() != batch.patches.size())
      fail(ErrorKind::kData, "backend returned the wrong number of rows");
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const auto& row = probs[k];
      if (row.size() != static_cast<std::size_t>(kNumClasses))
        fail(ErrorKind::kData, "backend rows must have one probability per class");
      double sum = 0.0;
      int best = 0;
      for (int c = 0; c < kNumClasses; ++c) {
        if (!(row[c] >= 0.0)) fail(ErrorKind::kData, "backend returned a negative probability");
        sum += row[c];
        if (row[c] > row[best]) best = c;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        fail(ErrorKind::kData, "backend probability row sums to " + text::format_real(sum));
      map.set(todo[begin + k].first, todo[begin + k].second, label_from_code(best));
    }
  }
  return map;
}

namespace {

kern::LabelGridView grid_view(const LabelMap& m) { return {m.cells.data(), m.width, m.height}; }

}  // namespace

LabelMap median_filter(const LabelMap& map, int window, kern::MedianMode mode) {
  require(window >= 1 && window % 2 == 1, "median window must be odd and >= 1");
  map.validate();
  LabelMap out = map;
  if (window == 1 || map.cells.empty()) return out;
  kern::parallel::median_filter_labels(grid_view(map), window, mode, out.cells.data());
  return out;
}

LabelMap priority_dilate(const LabelMap& map, int radius) {
  require(radius >= 0, "dilation radius must be non-negative");
  map.validate();
  LabelMap out = map;
  if (radius == 0 || map.cells.empty()) return out;
  // With normal = 0 and priority equal to the class code, per-class dilation
  // followed by the priority merge is the maximum over the cross.
  kern::parallel::dilate_labels(grid_view(map), radius, out.cells.data());
  return out;
}

LabelMap postprocess(const LabelMap& map, const PostprocessConfig& config) {
  config.validate();
  return priority_dilate(median_filter(map, config.median_window, config.median_mode),
                         config.dilate_radius);
}

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, kNumClasses> kPalette = {{
    {255, 255, 255},
    {0, 255, 0},
    {0, 0, 255},
    {255, 0, 0},
}};

constexpr std::string_view kLabelMapHeader = "HISTOPIPE-LABELMAP v1";

}  // namespace

void export_label_map(const std::filesystem::path& path, const LabelMap& map) {
  map.validate();
  IndexedImage img;
  img.width = map.width;
  img.height = map.height;
  img.indices = map.cells;
  img.palette.assign(kPalette.begin(), kPalette.end());
  write_indexed_png(path, img);
  text::KeyValueDoc doc;
  doc.header = std::string(kLabelMapHeader);
  doc.values["cell_stride_pixels"] = std::to_string(map.cell_stride_pixels);
  doc.values["classifier_downsample"] = text::format_real(map.classifier_downsample);
  doc.values["total_downsample"] = text::format_real(map.total_downsample);
  doc.values["slide_id"] = map.slide_id;
  text::write_file(sidecar_path(path), text::render_key_value(doc));
}

LabelMap import_label_map(const std::filesystem::path& path,
                          std::optional<double> expected_total_downsample) {
  const IndexedImage img = read_indexed_png(path);
  std::vector<int> to_class(img.palette.size(), -1);
  for (std::size_t p = 0; p < img.palette.size(); ++p)
    for (int c = 0; c < kNumClasses; ++c)
      if (img.palette[p] == kPalette[c]) to_class[p] = c;

  LabelMap map(img.width, img.height);
  for (std::size_t i = 0; i < img.indices.size(); ++i) {
    const auto idx = img.indices[i];
    if (idx >= to_class.size() || to_class[idx] < 0)
      fail(ErrorKind::kData, path.string() + ": pixel uses a color outside the label palette");
    map.cells[i] = static_cast<std::uint8_t>(to_class[idx]);
  }

  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side))
    fail(ErrorKind::kData, "label map " + path.string() + " has no sidecar");
  const auto doc = text::parse_key_value(text::read_file(side), kLabelMapHeader);
  map.cell_stride_pixels = static_cast<int>(doc.get_int("cell_stride_pixels"));
  map.classifier_downsample = doc.get_real("classifier_downsample");
  map.total_downsample = doc.get_real("total_downsample");
  map.slide_id = doc.has("slide_id") ? doc.get("slide_id") : "";
  map.validate();
  if (expected_total_downsample &&
      std::abs(*expected_total_downsample - map.total_downsample) > 1e-9 * map.total_downsample)
    fail(ErrorKind::kData, "label map downsample " + text::format_real(map.total_downsample) +
                               " differs from the expected " +
                               text::format_real(*expected_total_downsample));
  return map;
}

}  // namespace histo
