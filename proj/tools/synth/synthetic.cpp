#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace histo::synth {

namespace {

struct Look {
  std::array<double, 3> stroma;
  std::array<double, 3> nucleus;
  double nuclei_per_kpx;  // per 1000 level-0 pixels
  double radius;
};

constexpr std::array<Look, kNumClasses> kLooks = {{
    {{236, 178, 204}, {120, 70, 150}, 0.25, 5.0},   // normal: pink, sparse
    {{214, 160, 210}, {110, 60, 160}, 0.9, 6.5},    // benign
    {{186, 120, 190}, {80, 40, 130}, 1.8, 8.0},     // in situ
    {{150, 88, 160}, {50, 20, 90}, 3.0, 7.0},       // invasive: dark, dense
}};

std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)); }

}  // namespace

void paint_texture(RasterImage& image, LabelClass label, PixelRect rect, Rng& rng) {
  const auto& look = kLooks[static_cast<std::size_t>(code(label))];
  rect = rect.clipped(image.width(), image.height());
  if (rect.empty()) return;
  for (int y = rect.y; y < rect.y + rect.height; ++y)
    for (int x = rect.x; x < rect.x + rect.width; ++x) {
      const double n = rng.uniform(-12.0, 12.0);
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = clamp8(look.stroma[c] + n);
    }
  const double area = static_cast<double>(rect.width) * rect.height;
  const int nuclei = static_cast<int>(area / 1000.0 * look.nuclei_per_kpx + 0.5);
  for (int k = 0; k < nuclei; ++k) {
    const double cx = rect.x + rng.uniform() * rect.width;
    const double cy = rect.y + rng.uniform() * rect.height;
    const double r = look.radius * rng.uniform(0.7, 1.3);
    const int x0 = std::max(rect.x, static_cast<int>(cx - r));
    const int x1 = std::min(rect.x + rect.width - 1, static_cast<int>(cx + r));
    const int y0 = std::max(rect.y, static_cast<int>(cy - r));
    const int y1 = std::min(rect.y + rect.height - 1, static_cast<int>(cy + r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        if (d > r) continue;
        for (int c = 0; c < 3; ++c) image.at(x, y, c) = clamp8(look.nucleus[c] + rng.uniform(-10.0, 10.0));
      }
  }
}

RasterImage texture_patch(LabelClass label, int size, Rng& rng, double resolution_um) {
  RasterImage img(size, size, 3, resolution_um);
  paint_texture(img, label, {0, 0, size, size}, rng);
  return img;
}

namespace {

std::vector<Point> blob(Point c, double radius, Rng& rng) {
  std::vector<Point> poly;
  const int n = 14;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const double r = radius * rng.uniform(0.75, 1.15);
    poly.push_back({std::round(c.x + r * std::cos(a)), std::round(c.y + r * std::sin(a))});
  }
  return poly;
}

}  // namespace

SyntheticSlide make_slide(const SlideRecipe& recipe, const std::string& slide_id,
                          std::uint64_t seed) {
  Rng rng(seed);
  RasterImage slide(recipe.width, recipe.height, 3, recipe.resolution_um);
  // Glass: bright and almost unsaturated.
  for (int y = 0; y < slide.height(); ++y)
    for (int x = 0; x < slide.width(); ++x) {
      const double n = rng.uniform(-4.0, 4.0);
      slide.at(x, y, 0) = clamp8(243 + n);
      slide.at(x, y, 1) = clamp8(241 + n);
      slide.at(x, y, 2) = clamp8(244 + n);
    }

  // Tissue body: a large ellipse of normal texture covering most of the slide.
  const double cx = recipe.width / 2.0, cy = recipe.height / 2.0;
  const double ax = recipe.width * 0.42, ay = recipe.height * 0.40;
  RasterImage tissue(recipe.width, recipe.height, 3, recipe.resolution_um);
  paint_texture(tissue, LabelClass::kNormal, {0, 0, recipe.width, recipe.height}, rng);
  for (int y = 0; y < slide.height(); ++y)
    for (int x = 0; x < slide.width(); ++x) {
      const double dx = (x + 0.5 - cx) / ax, dy = (y + 0.5 - cy) / ay;
      if (dx * dx + dy * dy <= 1.0)
        for (int c = 0; c < 3; ++c) slide.at(x, y, c) = tissue.at(x, y, c);
    }

  SyntheticSlide out{std::move(slide), AnnotationSet(slide_id)};
  // Lesions on a ring inside the body, one class after another.
  const int total = recipe.regions_per_class * (kNumClasses - 1);
  for (int k = 0; k < total; ++k) {
    const auto label = label_from_code(1 + k % (kNumClasses - 1));
    const double a = 2.0 * std::numbers::pi * (k + rng.uniform(-0.15, 0.15)) / total;
    const Point c{cx + 0.55 * ax * std::cos(a), cy + 0.55 * ay * std::sin(a)};
    auto poly = blob(c, recipe.region_radius, rng);
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (auto p : poly) {
      x0 = std::min(x0, p.x); y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x); y1 = std::max(y1, p.y);
    }
    const PixelRect box{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1 - x0) + 1,
                        static_cast<int>(y1 - y0) + 1};
    RasterImage lesion(out.slide.width(), out.slide.height(), 3, recipe.resolution_um);
    paint_texture(lesion, label, box, rng);
    const auto clipped = box.clipped(out.slide.width(), out.slide.height());
    for (int y = clipped.y; y < clipped.y + clipped.height; ++y)
      for (int x = clipped.x; x < clipped.x + clipped.width; ++x)
        if (point_in_polygon(poly, {x + 0.5, y + 0.5}))
          for (int c = 0; c < 3; ++c) out.slide.at(x, y, c) = lesion.at(x, y, c);
    out.annotations.add({std::move(poly), label});
  }
  return out;
}

}  // namespace histo::synth
