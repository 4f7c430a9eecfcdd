#include "histo/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "histo/error.hpp"

namespace histo {

void AugmentationConfig::validate() const {
  require(scale_lo > 0.0 && scale_lo <= scale_hi, "scale range must satisfy 0 < lo <= hi");
  require(shift_fraction_max >= 0.0 && shift_fraction_max <= 1.0,
          "shift fraction must lie in [0, 1]");
  require(color.brightness >= 0.0 && color.saturation >= 0.0 && color.hue >= 0.0 &&
              color.contrast >= 0.0,
          "color jitter deltas must be non-negative");
}

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig c;
  c.rotate = false;
  c.flips = false;
  c.scale_lo = c.scale_hi = 1.0;
  c.shift_fraction_max = 0.0;
  c.color = {0.0, 0.0, 0.0, 0.0};
  return c;
}

bool AugmentationSample::geometric_identity() const noexcept {
  return std::fmod(angle, 360.0) == 0.0 && !flip_h && !flip_v && scale == 1.0 && shift_x == 0.0 &&
         shift_y == 0.0;
}

bool AugmentationSample::color_identity() const noexcept {
  return brightness == 0.0 && saturation == 0.0 && hue == 0.0 && contrast == 0.0;
}

AugmentationSample draw_sample(const AugmentationConfig& config, Rng& rng, int width, int height) {
  config.validate();
  AugmentationSample s;
  if (config.rotate) s.angle = rng.uniform(0.0, 360.0);
  if (config.flips) {
    s.flip_h = rng.bernoulli(0.5);
    s.flip_v = rng.bernoulli(0.5);
  }
  if (config.scale_hi > config.scale_lo)
    s.scale = rng.uniform(config.scale_lo, config.scale_hi);
  else
    s.scale = config.scale_lo;
  if (config.shift_fraction_max > 0.0) {
    const double mx = config.shift_fraction_max * width;
    const double my = config.shift_fraction_max * height;
    s.shift_x = rng.uniform(-mx, mx);
    s.shift_y = rng.uniform(-my, my);
  }
  auto delta = [&](double m) { return m > 0.0 ? rng.uniform(-m, m) : 0.0; };
  s.brightness = delta(config.color.brightness);
  s.saturation = delta(config.color.saturation);
  s.hue = delta(config.color.hue);
  s.contrast = delta(config.color.contrast);
  return s;
}

namespace {

/// cos/sin of an angle in degrees, exact at multiples of 90.
void exact_rotation(double degrees, double& c, double& s) {
  const double turns = degrees / 90.0;
  if (turns == std::floor(turns)) {
    const long q = ((static_cast<long>(turns) % 4) + 4) % 4;
    constexpr double cs[4] = {1.0, 0.0, -1.0, 0.0};
    constexpr double sn[4] = {0.0, 1.0, 0.0, -1.0};
    c = cs[q];
    s = sn[q];
    return;
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  c = std::cos(rad);
  s = std::sin(rad);
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

double clamp255(double v) { return std::clamp(v, 0.0, 255.0); }

}  // namespace

RasterImage apply_geometry(const RasterImage& image, const AugmentationSample& sample,
                           FillPolicy fill, const EnclosingRaster* context) {
  require(sample.scale > 0.0, "scale must be positive");
  if (fill == FillPolicy::kSourceContext && (context == nullptr || context->raster == nullptr))
    fail(ErrorKind::kInvalidArgument, "source_context fill needs an enclosing raster");
  if (context && context->raster)
    require(context->raster->channels() == image.channels(), "context channel count mismatch");
  if (sample.geometric_identity()) return image;

  const int w = image.width();
  const int h = image.height();
  const int ch = image.channels();
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  double cs, sn;
  exact_rotation(sample.angle, cs, sn);
  const double inv_scale = 1.0 / sample.scale;

  // Sampling source: the patch itself (edge clamped) or the enclosing raster.
  const RasterImage* src = &image;
  double ox = 0.0, oy = 0.0;
  if (fill == FillPolicy::kSourceContext) {
    src = context->raster;
    ox = context->origin_x;
    oy = context->origin_y;
  }
  const int sw = src->width();
  const int sh = src->height();

  RasterImage out(w, h, ch, image.resolution());
#pragma omp parallel for schedule(static) if (static_cast<long>(w) * h > 16384)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Inverse of: p' = c + shift + F(R(S(p - c))).
      double u = x - cx - sample.shift_x;
      double v = y - cy - sample.shift_y;
      if (sample.flip_h) u = -u;
      if (sample.flip_v) v = -v;
      const double ru = cs * u + sn * v;
      const double rv = -sn * u + cs * v;
      const double sx = std::clamp(ru * inv_scale + cx + ox, 0.0, static_cast<double>(sw - 1));
      const double sy = std::clamp(rv * inv_scale + cy + oy, 0.0, static_cast<double>(sh - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, sw - 1);
      const int y1 = std::min(y0 + 1, sh - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - fx) * src->at(x0, y0, c) + fx * src->at(x1, y0, c);
        const double bottom = (1.0 - fx) * src->at(x0, y1, c) + fx * src->at(x1, y1, c);
        out.at(x, y, c) = to_u8((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

RasterImage apply_color(const RasterImage& image, const AugmentationSample& sample) {
  if (sample.color_identity()) return image;
  const int ch = image.channels();
  std::vector<double> px(image.pixels().begin(), image.pixels().end());

  if (sample.brightness != 0.0)
    for (auto& v : px) v = clamp255(v + sample.brightness * 255.0);

  if (ch == 3 && (sample.saturation != 0.0 || sample.hue != 0.0)) {
    for (std::size_t i = 0; i + 2 < px.size(); i += 3) {
      Hsv hsv = rgb_to_hsv(px[i], px[i + 1], px[i + 2]);
      if (sample.saturation != 0.0) hsv.s = std::clamp(hsv.s * (1.0 + sample.saturation), 0.0, 1.0);
      if (sample.hue != 0.0) {
        hsv.h += sample.hue;
        hsv.h -= std::floor(hsv.h);
      }
      hsv_to_rgb(hsv, px[i], px[i + 1], px[i + 2]);
      for (int k = 0; k < 3; ++k) px[i + k] = clamp255(px[i + k]);
    }
  }

  if (sample.contrast != 0.0 && !px.empty()) {
    double mean = 0.0;
    for (double v : px) mean += v;
    mean /= static_cast<double>(px.size());
    for (auto& v : px) v = clamp255(mean + (v - mean) * (1.0 + sample.contrast));
  }

  RasterImage out(image.width(), image.height(), ch, image.resolution());
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) dst[i] = to_u8(px[i]);
  return out;
}

RasterImage apply(const RasterImage& image, const AugmentationSample& sample, FillPolicy fill,
                  const EnclosingRaster* context) {
  return apply_color(apply_geometry(image, sample, fill, context), sample);
}

AugmentedBatch augment_batch(std::span<const RasterImage> patches, const AugmentationConfig& config,
                             const DatasetStats& stats, std::uint64_t stream,
                             std::span<const std::uint64_t> ids,
                             std::span<const EnclosingRaster> contexts) {
  config.validate();
  require(ids.empty() || ids.size() == patches.size(), "one substream id per patch");
  require(contexts.empty() || contexts.size() == patches.size(), "one context per patch");
  if (config.fill == FillPolicy::kSourceContext && contexts.empty())
    fail(ErrorKind::kInvalidArgument, "source_context fill needs per-patch contexts");
  for (const auto& p : patches)
    if (p.width() != patches.front().width() || p.height() != patches.front().height() ||
        p.channels() != patches.front().channels())
      fail(ErrorKind::kInvalidArgument, "augment_batch needs patches of one shape");

  const std::size_t n = patches.size();
  AugmentedBatch out;
  out.images.resize(n);
  out.samples.resize(n);
  out.substreams.resize(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      const std::uint64_t id = ids.empty() ? static_cast<std::uint64_t>(i) : ids[i];
      out.substreams[i] = sample_seed(config.seed, stream, id);
      Rng rng(out.substreams[i]);
      out.samples[i] = draw_sample(config, rng, patches[i].width(), patches[i].height());
      const EnclosingRaster* ctx = contexts.empty() ? nullptr : &contexts[i];
      out.images[i] = normalize(apply(patches[i], out.samples[i], config.fill, ctx), stats);
    } catch (...) {
#pragma omp critical(histo_augment_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace histo
