#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "histo/augment/augment.hpp"
#include "histo/error.hpp"
#include "histo/imaging/ops.hpp"

using namespace histo;

namespace {

RasterImage random_image(int w, int h, std::uint64_t seed) {
  RasterImage img(w, h, 3, 1.0);
  std::mt19937_64 gen(seed);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(gen() & 0xFF);
  return img;
}

RasterImage rotate_cw(const RasterImage& img) {
  RasterImage out(img.height(), img.width(), img.channels(), img.resolution());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.height() - 1 - y, x, c) = img.at(x, y, c);
  return out;
}

RasterImage mirror(const RasterImage& img) {
  RasterImage out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
double ks_uniform_p(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("identity config draws the identity sample and leaves pixels bit-exact") {
  const auto cfg = AugmentationConfig::identity();
  Rng rng(1);
  const auto s = draw_sample(cfg, rng, 32, 32);
  CHECK(s == AugmentationSample{});
  CHECK(s.geometric_identity());
  CHECK(s.color_identity());
  const auto img = random_image(31, 31, 5);
  CHECK(apply(img, s) == img);
}

TEST_CASE("draws are deterministic and stay in range") {
  AugmentationConfig cfg;
  Rng a(42), b(42);
  for (int i = 0; i < 500; ++i) {
    const auto s = draw_sample(cfg, a, 40, 30);
    CHECK(s == draw_sample(cfg, b, 40, 30));
    CHECK(s.angle >= 0.0);
    CHECK(s.angle < 360.0);
    CHECK(s.scale >= 0.5);
    CHECK(s.scale <= 2.0);
    CHECK(std::abs(s.shift_x) <= 0.5 * 40);
    CHECK(std::abs(s.shift_y) <= 0.5 * 30);
    CHECK(std::abs(s.brightness) <= cfg.color.brightness);
    CHECK(std::abs(s.hue) <= cfg.color.hue);
  }
}

TEST_CASE("10,000 scale draws are uniform on [0.5, 2] (KS p > 0.01)") {
  AugmentationConfig cfg;
  Rng rng(2018);
  std::vector<double> scales;
  for (int i = 0; i < 10000; ++i) scales.push_back(draw_sample(cfg, rng, 157, 157).scale);
  const double p = ks_uniform_p(scales, 0.5, 2.0);
  MESSAGE("KS p-value " << p);
  CHECK(p > 0.01);
  // The test has power: log-uniform draws on the same range fail it.
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(std::log(0.5), std::log(2.0));
  std::vector<double> logu;
  for (int i = 0; i < 10000; ++i) logu.push_back(std::exp(u(gen)));
  CHECK(ks_uniform_p(logu, 0.5, 2.0) < 0.01);
}

TEST_CASE("flips are involutions and mirror the image") {
  const auto img = random_image(17, 12, 3);
  AugmentationSample h;
  h.flip_h = true;
  CHECK(apply(img, h) == mirror(img));
  CHECK(apply(apply(img, h), h) == img);
  AugmentationSample v;
  v.flip_v = true;
  CHECK(apply(apply(img, v), v) == img);
  CHECK(apply(img, v) != img);
}

TEST_CASE("rotations by multiples of 90 degrees are exact permutations") {
  RasterImage two(2, 2, 1, 1.0);
  two.at(0, 0) = 1;
  two.at(1, 0) = 2;
  two.at(0, 1) = 3;
  two.at(1, 1) = 4;
  AugmentationSample r;
  r.angle = 90.0;
  const auto rotated = apply(two, r);
  const bool cw = rotated == rotate_cw(two);
  const bool ccw = rotated == rotate_cw(rotate_cw(rotate_cw(two)));
  CHECK((cw || ccw));

  const auto img = random_image(20, 20, 8);
  auto expect = img;
  for (int k = 1; k <= 3; ++k) {
    expect = cw ? rotate_cw(expect) : rotate_cw(rotate_cw(rotate_cw(expect)));
    r.angle = 90.0 * k;
    CHECK(apply(img, r) == expect);
  }
  r.angle = 90.0;
  CHECK(apply(apply(apply(apply(img, r), r), r), r) == img);
}

TEST_CASE("color jitter: zero deltas are identity, brightness shifts the mean") {
  const auto img = random_image(16, 16, 9);
  AugmentationSample s;
  CHECK(apply_color(img, s) == img);
  s.brightness = 0.1;
  const auto brighter = apply_color(img, s);
  double before = 0, after = 0;
  for (std::size_t i = 0; i < img.size(); ++i) before += img.pixels()[i], after += brighter.pixels()[i];
  CHECK(after > before);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(brighter.pixels()[i] >= img.pixels()[i]);
  s = {};
  s.contrast = -1.0;  // collapses every channel onto its mean
  const auto flat = apply_color(img, s);
  for (int y = 0; y < 16; ++y) CHECK(flat.at(0, y, 0) == flat.at(5, 3, 0));
}

TEST_CASE("source-context fill reads the enclosing raster instead of replicating edges") {
  RasterImage big(12, 12, 3, 1.0);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x)
      for (int c = 0; c < 3; ++c) big.at(x, y, c) = static_cast<std::uint8_t>(20 * x + y);
  const auto patch = crop_rect(big, {4, 4, 4, 4});
  AugmentationSample shift;
  shift.shift_x = 2.0;
  const EnclosingRaster ctx{&big, 4, 4};
  const auto with_ctx = apply(patch, shift, FillPolicy::kSourceContext, &ctx);
  const auto edge = apply(patch, shift, FillPolicy::kNearestEdge);
  CHECK(with_ctx.at(0, 0) == big.at(2, 4));
  CHECK(edge.at(0, 0) == patch.at(0, 0));
  CHECK_THROWS_AS(apply(patch, shift, FillPolicy::kSourceContext), Error);
}

TEST_CASE("batch augmentation: one distinct substream per patch, degenerate config is plain normalization") {
  std::vector<RasterImage> patches;
  for (int i = 0; i < 6; ++i) patches.push_back(random_image(8, 8, 100 + i));
  const auto stats = compute_dataset_stats(std::span<const RasterImage>(patches));
  auto plain = augment_batch(patches, AugmentationConfig::identity(), stats, 0);
  REQUIRE(plain.images.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(plain.images[i] == normalize(patches[i], stats));

  AugmentationConfig cfg;
  cfg.seed = 3;
  const auto a = augment_batch(patches, cfg, stats, 1);
  CHECK(std::set<std::uint64_t>(a.substreams.begin(), a.substreams.end()).size() == 6);
  CHECK(augment_batch(patches, cfg, stats, 1).images == a.images);
  CHECK(augment_batch(patches, cfg, stats, 2).samples != a.samples);

  std::vector<RasterImage> mixed = patches;
  mixed.push_back(random_image(9, 8, 1));
  CHECK_THROWS_AS(augment_batch(mixed, cfg, stats, 1), Error);
}
