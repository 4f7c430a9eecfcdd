#include "histo/patches/extract.hpp"

#include <cmath>
#include <exception>
#include <optional>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/rng.hpp"
#include "histo/text.hpp"

namespace histo {

DatasetManifest Extraction::manifest() const {
  DatasetManifest m;
  for (const auto& p : patches) m.add(p.record);
  m.meta["downsample"] = text::format_real(downsample);
  m.meta["grid_spacing"] = text::format_real(grid.spacing);
  m.meta["discarded_background"] = std::to_string(discarded_background);
  m.meta["discarded_unannotated"] = std::to_string(discarded_unannotated);
  m.meta["planned"] = std::to_string(planned);
  if (context_margin_px > 0) m.meta["context_margin_px"] = std::to_string(context_margin_px);
  return m;
}

double extraction_downsample(const ExtractionConfig& config, double level0_resolution_um) {
  require(config.patch_physical_um > 0.0 && config.patch_pixel_px > 0,
          "patch physical and pixel size must be positive");
  require(level0_resolution_um > 0.0, "slide resolution must be positive");
  const double target = config.patch_physical_um / config.patch_pixel_px;
  const double ratio = target / level0_resolution_um;
  if (ratio < 1.0 - 1e-9)
    fail(ErrorKind::kInvalidArgument,
         "target resolution " + text::format_real(target) + " um/px is finer than the slide's " +
             text::format_real(level0_resolution_um) + " um/px");
  return ratio;
}

GridSpec extraction_grid(const RasterImage& slide, const ExtractionConfig& config,
                         const std::string& slide_id) {
  const double ds = extraction_downsample(config, slide.resolution());
  GridSpec g;
  g.extent = {0.0, 0.0, static_cast<double>(slide.width()), static_cast<double>(slide.height())};
  g.patch_size_level0 = config.patch_pixel_px * ds;
  g.spacing = config.spacing_level0.value_or(g.patch_size_level0);
  require(g.spacing > 0.0, "grid spacing must be positive");
  if (config.offset_seed) {
    Rng rng(derive_seed(*config.offset_seed, text::fnv1a(slide_id)));
    const auto span = static_cast<std::uint64_t>(std::ceil(g.spacing));
    auto draw = [&] {
      return std::min(static_cast<double>(rng.below(span)), std::floor(std::nextafter(g.spacing, 0.0)));
    };
    g.origin_offset.x = draw();
    g.origin_offset.y = draw();
  }
  g.validate();
  return g;
}

namespace {

PixelPoint pixel_of(Point p) {
  return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}

bool has_tissue(const TissueMask& mask, const GridSpec& grid, int column, int row,
                double slide_resolution, const ExtractionConfig& config) {
  if (mask.scope == MaskScope::kOnePixelPerPatch) {
    if (mask.width != grid.columns() || mask.height != grid.rows())
      fail(ErrorKind::kData, "coarse mask does not match the extraction grid");
    return mask.foreground(column, row);
  }
  const Point c = grid.center(column, row);
  const double scale = slide_resolution / mask.resolution;
  const double half = grid.patch_size_level0 / 2.0;
  const int x0 = static_cast<int>(std::floor((c.x - half) * scale));
  const int y0 = static_cast<int>(std::floor((c.y - half) * scale));
  const int x1 = static_cast<int>(std::ceil((c.x + half) * scale));
  const int y1 = static_cast<int>(std::ceil((c.y + half) * scale));
  return keeps_patch(patch_foreground_fraction(mask, {x0, y0, x1 - x0, y1 - y0}),
                     config.min_foreground_fraction);
}

}  // namespace

Extraction extract_patches(const RasterImage& slide, const std::string& slide_id,
                           const ExtractionConfig& config, const AnnotationSet* annotations,
                           const TissueMask* mask) {
  if (config.require_annotations && annotations == nullptr)
    fail(ErrorKind::kData, "labels requested but slide '" + slide_id + "' has no annotations");
  require(slide.width() > 0 && slide.height() > 0, "slide is empty");
  require(config.context_margin_px >= 0, "context margin must be non-negative");
  if (mask && mask->scope == MaskScope::kFullResolutionGrid && !(mask->resolution > 0.0))
    fail(ErrorKind::kData, "mask resolution must be positive");

  Extraction out;
  out.grid = extraction_grid(slide, config, slide_id);
  out.downsample = out.grid.patch_size_level0 / config.patch_pixel_px;
  const int cols = out.grid.columns();
  const int rows = out.grid.rows();
  out.planned = static_cast<std::size_t>(cols) * rows;
  out.context_margin_px = config.context_margin_px;

  const int crop_level0 = round_half_up(out.grid.patch_size_level0);
  const int ctx_px = config.patch_pixel_px + 2 * config.context_margin_px;
  const int ctx_level0 = round_half_up(ctx_px * out.downsample);
  const double patch_res = config.patch_physical_um / config.patch_pixel_px;
  const bool filter = mask != nullptr && config.background != BackgroundRule::kNone;
  if (filter && config.background == BackgroundRule::kCoarseGrid &&
      mask->scope != MaskScope::kOnePixelPerPatch)
    fail(ErrorKind::kData, "coarse background rule needs a one-pixel-per-patch mask");

  enum class Fate : std::uint8_t { kKept, kBackground, kUnannotated };
  std::vector<std::optional<ExtractedPatch>> slots(out.planned);
  std::vector<Fate> fates(out.planned, Fate::kKept);
  std::exception_ptr error;

#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(out.planned); ++i) {
    try {
      const int col = static_cast<int>(i % cols);
      const int row = static_cast<int>(i / cols);
      const Point c = out.grid.center(col, row);
      if (filter && !has_tissue(*mask, out.grid, col, row, slide.resolution(), config)) {
        fates[i] = Fate::kBackground;
        continue;
      }
      LabelClass label = LabelClass::kNormal;
      if (annotations) {
        const auto hit = annotations->lookup(c);
        if (!hit && config.unannotated == UnannotatedPolicy::kExclude) {
          fates[i] = Fate::kUnannotated;
          continue;
        }
        label = hit.value_or(LabelClass::kNormal);
      }
      ExtractedPatch p;
      p.record = {slide_id, c, label, config.patch_physical_um, config.patch_pixel_px, "", ""};
      const auto center_px = pixel_of(c);
      p.image = resize(crop_with_fill(slide, center_px, crop_level0), config.patch_pixel_px,
                       config.patch_pixel_px);
      p.image.set_resolution(patch_res);
      if (config.context_margin_px > 0) {
        p.context = resize(crop_with_fill(slide, center_px, ctx_level0), ctx_px, ctx_px);
        p.context->set_resolution(patch_res);
      }
      slots[i] = std::move(p);
    } catch (...) {
#pragma omp critical(histo_extract_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t i = 0; i < out.planned; ++i) {
    switch (fates[i]) {
      case Fate::kBackground: ++out.discarded_background; break;
      case Fate::kUnannotated: ++out.discarded_unannotated; break;
      case Fate::kKept: out.patches.push_back(std::move(*slots[i])); break;
    }
  }
  return out;
}

namespace {

std::uint64_t hash_raster(const RasterImage& image, std::uint64_t h) {
  const auto px = image.pixels();
  h = text::fnv1a(std::string_view(reinterpret_cast<const char*>(px.data()), px.size()), h);
  const std::string dims = std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                           "x" + std::to_string(image.channels());
  return text::fnv1a(dims, h);
}

// The context raster is part of the key so identical patches with different
// surroundings never share a context payload.
std::string content_name(const ExtractedPatch& p) {
  std::uint64_t h = hash_raster(p.image, 0xcbf29ce484222325ULL);
  if (p.context) h = hash_raster(*p.context, h);
  return text::hex64(h);
}

}  // namespace

void write_payloads(Extraction& extraction, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "patches");
  for (auto& p : extraction.patches) {
    const std::string name = content_name(p);
    const std::string rel = "patches/" + name + ".png";
    if (!std::filesystem::exists(root / rel)) write_png(root / rel, p.image);
    if (p.context) {
      const std::string ctx_rel = "patches/" + name + "_ctx.png";
      if (!std::filesystem::exists(root / ctx_rel)) write_png(root / ctx_rel, *p.context);
    }
    p.record.path = rel;
  }
}

}  // namespace histo
