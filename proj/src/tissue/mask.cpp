#include "histo/tissue/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histo/error.hpp"
#include "histo/imaging/image_io.hpp"

namespace histo {

std::size_t TissueMask::foreground_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

namespace {

double variance_from_sums(std::uint64_t n0, std::uint64_t s0, std::uint64_t total_n,
                          std::uint64_t total_s) {
  const std::uint64_t n1 = total_n - n0;
  if (n0 == 0 || n1 == 0) return 0.0;
  const double w0 = static_cast<double>(n0) / static_cast<double>(total_n);
  const double w1 = static_cast<double>(n1) / static_cast<double>(total_n);
  const double mu0 = static_cast<double>(s0) / static_cast<double>(n0);
  const double mu1 = static_cast<double>(total_s - s0) / static_cast<double>(n1);
  return w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
}

void totals(const Histogram256& h, std::uint64_t& n, std::uint64_t& s) {
  n = 0;
  s = 0;
  for (int b = 0; b < 256; ++b) {
    n += h[b];
    s += static_cast<std::uint64_t>(b) * h[b];
  }
}

int resolve_threshold(const Histogram256& hist, const MaskOptions& options) {
  if (options.fixed_threshold) {
    require(*options.fixed_threshold >= 0 && *options.fixed_threshold <= 255,
            "fixed threshold must lie in [0, 255]");
    return *options.fixed_threshold;
  }
  return otsu_threshold(hist);
}

void require_rgb(const RasterImage& rgb) {
  if (rgb.empty() || rgb.channels() != 3)
    fail(ErrorKind::kInvalidArgument, "tissue masking needs a 3-channel RGB image");
}

}  // namespace

double between_class_variance(const Histogram256& histogram, int t) {
  require(t >= 0 && t <= 255, "threshold out of range");
  std::uint64_t n, s;
  totals(histogram, n, s);
  std::uint64_t n0 = 0, s0 = 0;
  for (int b = 0; b <= t; ++b) {
    n0 += histogram[b];
    s0 += static_cast<std::uint64_t>(b) * histogram[b];
  }
  return variance_from_sums(n0, s0, n, s);
}

int otsu_threshold(const Histogram256& histogram) {
  std::uint64_t n, s;
  totals(histogram, n, s);
  if (n == 0) fail(ErrorKind::kInvalidArgument, "Otsu threshold of an empty histogram");
  int best_t = 0;
  double best = -std::numeric_limits<double>::infinity();
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += histogram[t];
    s0 += static_cast<std::uint64_t>(t) * histogram[t];
    const double v = variance_from_sums(n0, s0, n, s);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

RasterImage saturation_image(const RasterImage& rgb) {
  require_rgb(rgb);
  RasterImage sat(rgb.width(), rgb.height(), 1, rgb.resolution());
  kern::parallel::saturation_plane({rgb.data(), rgb.width(), rgb.height(), 3}, sat.data());
  return sat;
}

Histogram256 saturation_histogram(const RasterImage& rgb) {
  return kern::parallel::histogram(saturation_image(rgb).pixels());
}

TissueMask compute_mask(const RasterImage& rgb, const MaskOptions& options) {
  const RasterImage sat = saturation_image(rgb);
  const int t = resolve_threshold(kern::parallel::histogram(sat.pixels()), options);
  TissueMask mask;
  mask.width = rgb.width();
  mask.height = rgb.height();
  mask.resolution = rgb.resolution();
  mask.scope = MaskScope::kFullResolutionGrid;
  mask.bits.resize(sat.size());
  const auto src = sat.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) mask.bits[i] = src[i] > t ? 1 : 0;
  return mask;
}

TissueMask coarse_mask_for_grid(const RasterImage& rgb_lowres, const GridSpec& grid,
                                double level0_resolution_um, const MaskOptions& options) {
  require(level0_resolution_um > 0.0, "level-0 resolution must be positive");
  grid.validate();
  const RasterImage sat = saturation_image(rgb_lowres);
  const int t = resolve_threshold(kern::parallel::histogram(sat.pixels()), options);
  const double scale = level0_resolution_um / rgb_lowres.resolution();
  const int w = sat.width();
  const int h = sat.height();

  TissueMask mask;
  mask.width = grid.columns();
  mask.height = grid.rows();
  mask.resolution = grid.spacing * level0_resolution_um;
  mask.scope = MaskScope::kOnePixelPerPatch;
  mask.bits.assign(static_cast<std::size_t>(mask.width) * mask.height, 0);

  for (int row = 0; row < mask.height; ++row)
    for (int col = 0; col < mask.width; ++col) {
      const Point c = grid.center(col, row);
      const double u = c.x * scale;
      const double v = c.y * scale;
      if (u < 0.0 || v < 0.0 || u > w || v > h)
        fail(ErrorKind::kInvalidArgument, "grid center lies outside the low-resolution raster");
      // Continuous coordinates to pixel-center sample positions.
      const double su = std::clamp(u - 0.5, 0.0, static_cast<double>(w - 1));
      const double sv = std::clamp(v - 0.5, 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(std::floor(su));
      const int y0 = static_cast<int>(std::floor(sv));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = su - x0;
      const double fy = sv - y0;
      const double top = (1.0 - fx) * sat.at(x0, y0) + fx * sat.at(x1, y0);
      const double bottom = (1.0 - fx) * sat.at(x0, y1) + fx * sat.at(x1, y1);
      const double value = (1.0 - fy) * top + fy * bottom;
      mask.bits[static_cast<std::size_t>(row) * mask.width + col] = value > t ? 1 : 0;
    }
  return mask;
}

double patch_foreground_fraction(const TissueMask& mask, PixelRect rect) {
  const PixelRect r = rect.clipped(mask.width, mask.height);
  if (r.empty()) fail(ErrorKind::kInvalidArgument, "patch rectangle does not overlap the mask");
  std::size_t fg = 0;
  for (int y = r.y; y < r.y + r.height; ++y) {
    const std::uint8_t* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    for (int x = r.x; x < r.x + r.width; ++x) fg += row[x] != 0;
  }
  return static_cast<double>(fg) / (static_cast<double>(r.width) * r.height);
}

void save_mask(const std::filesystem::path& path, const TissueMask& mask) {
  RasterImage img(mask.width, mask.height, 1, mask.resolution);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) img.pixels()[i] = mask.bits[i] ? 255 : 0;
  write_raster(path, img,
               {{"scope", mask.scope == MaskScope::kOnePixelPerPatch ? "one_pixel_per_patch"
                                                                      : "full_resolution_grid"}});
}

TissueMask load_mask(const std::filesystem::path& path) {
  const RasterImage img = read_raster(path);
  if (img.channels() != 1) fail(ErrorKind::kFormat, path.string() + ": mask must be grayscale");
  TissueMask mask;
  mask.width = img.width();
  mask.height = img.height();
  mask.resolution = img.resolution();
  const auto meta = read_sidecar(path);
  mask.scope = meta && meta->has("scope") && meta->get("scope") == "one_pixel_per_patch"
                   ? MaskScope::kOnePixelPerPatch
                   : MaskScope::kFullResolutionGrid;
  mask.bits.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) mask.bits[i] = img.pixels()[i] > 127 ? 1 : 0;
  return mask;
}

}  // namespace histo
