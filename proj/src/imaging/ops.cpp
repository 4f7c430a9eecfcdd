#include "histo/imaging/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "histo/kernels/kernels.hpp"

namespace histo {

PixelRect PixelRect::clipped(int bound_w, int bound_h) const noexcept {
  const int x0 = std::max(x, 0);
  const int y0 = std::max(y, 0);
  const int x1 = std::min(x + width, bound_w);
  const int y1 = std::min(y + height, bound_h);
  return {x0, y0, std::max(x1 - x0, 0), std::max(y1 - y0, 0)};
}

int round_half_up(double value) { return static_cast<int>(std::floor(value + 0.5)); }

int resampled_dimension(int input_dim, double factor) {
  require(factor > 0.0, "resample factor must be positive");
  return round_half_up(static_cast<double>(input_dim) / factor);
}

namespace {

kern::ImageView view(const RasterImage& img) {
  return {img.data(), img.width(), img.height(), img.channels()};
}

}  // namespace

RasterImage resize(const RasterImage& image, int width, int height, ResampleMethod method) {
  require(!image.empty(), "cannot resample an empty image");
  require(width > 0 && height > 0, "resampled image would have a zero dimension");
  const double res = image.resolution() * static_cast<double>(image.width()) / width;
  RasterImage out(width, height, image.channels(), res);
  if (width == image.width() && height == image.height()) {
    std::copy(image.pixels().begin(), image.pixels().end(), out.pixels().begin());
    return out;
  }
  kern::MutableImageView dst{out.data(), width, height, image.channels()};
  if (method == ResampleMethod::kBilinear)
    kern::parallel::resample_bilinear(view(image), dst);
  else
    kern::parallel::resample_nearest(view(image), dst);
  return out;
}

RasterImage resample(const RasterImage& image, double factor, ResampleMethod method) {
  require(factor > 0.0, "resample factor must be positive");
  require(!image.empty(), "cannot resample an empty image");
  const int w = resampled_dimension(image.width(), factor);
  const int h = resampled_dimension(image.height(), factor);
  require(w > 0 && h > 0, "resampled image would have a zero dimension");
  RasterImage out = resize(image, w, h, method);
  out.set_resolution(image.resolution() * factor);
  return out;
}

RasterImage crop_with_fill(const RasterImage& source, PixelPoint center, int size,
                           FillPolicy fill, const EnclosingRaster* context) {
  require(size > 0, "crop size must be positive");
  require(!source.empty(), "cannot crop an empty image");
  const RasterImage* ctx = nullptr;
  if (fill == FillPolicy::kSourceContext) {
    if (context == nullptr || context->raster == nullptr || context->raster->empty())
      fail(ErrorKind::kInvalidArgument, "source_context fill requires an enclosing raster");
    require(context->raster->channels() == source.channels(),
            "enclosing raster channel count differs from the source");
    ctx = context->raster;
  }
  const int c = source.channels();
  const int x0 = center.x - size / 2;
  const int y0 = center.y - size / 2;
  RasterImage out(size, size, c, source.resolution());
  for (int y = 0; y < size; ++y) {
    const int sy = y0 + y;
    for (int x = 0; x < size; ++x) {
      const int sx = x0 + x;
      const std::uint8_t* p;
      if (sx >= 0 && sy >= 0 && sx < source.width() && sy < source.height()) {
        p = &source.at(sx, sy);
      } else if (ctx != nullptr) {
        const int ex = std::clamp(sx + context->origin_x, 0, ctx->width() - 1);
        const int ey = std::clamp(sy + context->origin_y, 0, ctx->height() - 1);
        p = &ctx->at(ex, ey);
      } else {
        p = &source.at(std::clamp(sx, 0, source.width() - 1),
                       std::clamp(sy, 0, source.height() - 1));
      }
      std::copy(p, p + c, &out.at(x, y));
    }
  }
  return out;
}

RasterImage crop_rect(const RasterImage& source, PixelRect rect) {
  require(!rect.empty(), "crop rectangle is empty");
  const int c = source.channels();
  RasterImage out(rect.width, rect.height, c, source.resolution());
  for (int y = 0; y < rect.height; ++y) {
    const int sy = std::clamp(rect.y + y, 0, source.height() - 1);
    for (int x = 0; x < rect.width; ++x) {
      const int sx = std::clamp(rect.x + x, 0, source.width() - 1);
      const std::uint8_t* p = &source.at(sx, sy);
      std::copy(p, p + c, &out.at(x, y));
    }
  }
  return out;
}

DatasetStats compute_dataset_stats(std::span<const RasterImage> images) {
  require(!images.empty(), "dataset statistics need at least one image");
  const int channels = images.front().channels();
  for (const auto& img : images)
    require(img.channels() == channels, "all images must share a channel count");

  // 8-bit data: integer sums are exact, so per-image partials merge in any
  // order to the same totals.
  struct Partial {
    std::uint64_t count = 0;
    std::array<unsigned __int128, 3> sum{};
    std::array<unsigned __int128, 3> sumsq{};
  };
  std::vector<Partial> partials(images.size());
  const std::int64_t n_images = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n_images; ++i) {
    const RasterImage& img = images[i];
    Partial& p = partials[i];
    p.count = static_cast<std::uint64_t>(img.width()) * img.height();
    std::array<std::uint64_t, 3> s{}, ss{};
    const auto px = img.pixels();
    for (std::size_t k = 0; k < px.size(); k += channels)
      for (int c = 0; c < channels; ++c) {
        const std::uint64_t v = px[k + c];
        s[c] += v;
        ss[c] += v * v;
      }
    for (int c = 0; c < channels; ++c) {
      p.sum[c] = s[c];
      p.sumsq[c] = ss[c];
    }
  }
  Partial total;
  for (const Partial& p : partials) {
    total.count += p.count;
    for (int c = 0; c < channels; ++c) {
      total.sum[c] += p.sum[c];
      total.sumsq[c] += p.sumsq[c];
    }
  }
  DatasetStats stats;
  stats.sample_count = total.count;
  const unsigned __int128 n = total.count;
  for (int c = 0; c < channels; ++c) {
    const unsigned __int128 num = n * total.sumsq[c] - total.sum[c] * total.sum[c];
    const long double var =
        static_cast<long double>(num) / (static_cast<long double>(n) * static_cast<long double>(n));
    stats.mean.push_back(static_cast<double>(static_cast<long double>(total.sum[c]) /
                                             static_cast<long double>(n)));
    stats.stddev.push_back(static_cast<double>(std::sqrt(var)));
  }
  return stats;
}

DatasetStats compute_dataset_stats(std::span<const FloatImage> images) {
  require(!images.empty(), "dataset statistics need at least one image");
  const int channels = images.front().channels();
  for (const auto& img : images)
    require(img.channels() == channels, "all images must share a channel count");

  struct Moments {
    double count = 0.0;
    std::array<double, 3> mean{};
    std::array<double, 3> m2{};
  };
  std::vector<Moments> parts(images.size());
  const std::int64_t n_images = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n_images; ++i) {
    const FloatImage& img = images[i];
    Moments& m = parts[i];
    const auto px = img.pixels();
    m.count = static_cast<double>(img.width()) * img.height();
    for (int c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t k = c; k < px.size(); k += channels) s += px[k];
      const double mean = s / m.count;
      double q = 0.0;
      for (std::size_t k = c; k < px.size(); k += channels) q += (px[k] - mean) * (px[k] - mean);
      m.mean[c] = mean;
      m.m2[c] = q;
    }
  }
  // Chan et al. pairwise merge, in image order.
  Moments acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Moments& b = parts[i];
    const double n = acc.count + b.count;
    for (int c = 0; c < channels; ++c) {
      const double delta = b.mean[c] - acc.mean[c];
      acc.m2[c] += b.m2[c] + delta * delta * acc.count * b.count / n;
      acc.mean[c] += delta * b.count / n;
    }
    acc.count = n;
  }
  DatasetStats stats;
  stats.sample_count = static_cast<std::size_t>(acc.count);
  for (int c = 0; c < channels; ++c) {
    stats.mean.push_back(acc.mean[c]);
    stats.stddev.push_back(std::sqrt(std::max(acc.m2[c] / acc.count, 0.0)));
  }
  return stats;
}

namespace {

template <typename In>
FloatImage normalize_impl(const Raster<In>& image, const DatasetStats& stats, double epsilon) {
  require(image.channels() == stats.channels(), "image and statistics channel counts differ");
  require(epsilon > 0.0, "epsilon must be positive");
  const int c = image.channels();
  std::array<double, 3> scale{}, mean{};
  for (int k = 0; k < c; ++k) {
    mean[k] = stats.mean[k];
    scale[k] = 1.0 / std::max(stats.stddev[k], epsilon);
  }
  FloatImage out(image.width(), image.height(), c, image.resolution());
  const auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int k = static_cast<int>(i % c);
    dst[i] = static_cast<float>((static_cast<double>(src[i]) - mean[k]) * scale[k]);
  }
  return out;
}

}  // namespace

FloatImage normalize(const RasterImage& image, const DatasetStats& stats, double epsilon) {
  return normalize_impl(image, stats, epsilon);
}

FloatImage normalize(const FloatImage& image, const DatasetStats& stats, double epsilon) {
  return normalize_impl(image, stats, epsilon);
}

FloatImage denormalize(const FloatImage& image, const DatasetStats& stats, double epsilon) {
  require(image.channels() == stats.channels(), "image and statistics channel counts differ");
  const int c = image.channels();
  FloatImage out(image.width(), image.height(), c, image.resolution());
  const auto src = image.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int k = static_cast<int>(i % c);
    dst[i] = static_cast<float>(src[i] * std::max(stats.stddev[k], epsilon) + stats.mean[k]);
  }
  return out;
}

std::uint8_t saturation8(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  if (mx == 0) return 0;
  return static_cast<std::uint8_t>(((mx - mn) * 255 + mx / 2) / mx);
}

Hsv rgb_to_hsv(double r, double g, double b) noexcept {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) return out;
  double h;
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
  out.h = h;
  return out;
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) noexcept {
  const double h6 = (hsv.h - std::floor(hsv.h)) * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double v = hsv.v;
  const double p = v * (1.0 - hsv.s);
  const double q = v * (1.0 - hsv.s * f);
  const double t = v * (1.0 - hsv.s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace histo
