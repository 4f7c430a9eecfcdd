#include "histo/annotations/annotations.hpp"

#include <algorithm>
#include <cmath>

#include "histo/error.hpp"
#include "histo/text.hpp"

namespace histo {

bool point_in_polygon(std::span<const Point> polygon, Point p) noexcept {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[i];
    const Point& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double polygon_area(std::span<const Point> polygon) noexcept {
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    twice += polygon[j].x * polygon[i].y - polygon[i].x * polygon[j].y;
  return 0.5 * twice;
}

AnnotationSet::AnnotationSet(std::string slide_id, std::vector<Region> regions)
    : slide_id_(std::move(slide_id)) {
  for (auto& r : regions) add(std::move(r));
}

void AnnotationSet::add(Region region) {
  if (region.polygon.size() < 3)
    fail(ErrorKind::kData, "annotation polygon needs at least 3 vertices");
  if (polygon_area(region.polygon) == 0.0)
    fail(ErrorKind::kData, "annotation polygon has zero area");
  if (region.label == LabelClass::kNormal || !is_valid_label_code(code(region.label)))
    fail(ErrorKind::kData, "annotation class must be 1, 2 or 3");
  Bounds b{region.polygon[0].x, region.polygon[0].y, region.polygon[0].x, region.polygon[0].y};
  for (const Point& p : region.polygon) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  bounds_.push_back(b);
  regions_.push_back(std::move(region));
}

std::optional<LabelClass> AnnotationSet::lookup(Point p) const noexcept {
  std::optional<LabelClass> best;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const Bounds& b = bounds_[i];
    if (p.x < b.x0 || p.x > b.x1 || p.y < b.y0 || p.y > b.y1) continue;
    const LabelClass c = regions_[i].label;
    if (best && code(*best) >= code(c)) continue;
    if (point_in_polygon(regions_[i].polygon, p)) best = c;
  }
  return best;
}

LabelMap rasterize(const AnnotationSet& annotations, const GridSpec& grid,
                   int cell_stride_pixels) {
  grid.validate();
  require(cell_stride_pixels > 0, "cell stride must be positive");
  LabelMap map(grid.columns(), grid.rows());
  map.cell_stride_pixels = cell_stride_pixels;
  map.total_downsample = grid.spacing;
  map.classifier_downsample = grid.spacing / cell_stride_pixels;
  map.slide_id = annotations.slide_id();
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      map.set(x, y, annotations.class_at_point(grid.center(x, y)));
  return map;
}

AnnotationSet parse_annotations(std::string_view contents, std::string default_slide_id) {
  AnnotationSet set(std::move(default_slide_id));
  std::string slide;
  std::vector<Region> regions;
  int line_no = 0;
  for (auto raw : text::split(contents, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = text::trim(line.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "annotation line " + std::to_string(line_no);
    std::optional<int> cls;
    std::optional<std::vector<Point>> pts;
    for (auto field : text::split(line, ';')) {
      field = text::trim(field);
      if (field.empty()) continue;
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::kFormat, where + ": expected key=value");
      const auto key = text::trim(field.substr(0, eq));
      const auto value = text::trim(field.substr(eq + 1));
      if (key == "slide") {
        slide = std::string(value);
      } else if (key == "class") {
        cls = static_cast<int>(text::parse_int(value, where + " class"));
      } else if (key == "points") {
        std::vector<Point> poly;
        for (auto pair : text::split(value, ' ')) {
          if (text::trim(pair).empty()) continue;
          const auto xy = text::split(pair, ',');
          if (xy.size() != 2) fail(ErrorKind::kFormat, where + ": vertex must be x,y");
          poly.push_back({text::parse_real(xy[0], where), text::parse_real(xy[1], where)});
        }
        pts = std::move(poly);
      } else {
        fail(ErrorKind::kFormat, where + ": unknown key '" + std::string(key) + "'");
      }
    }
    if (cls.has_value() != pts.has_value())
      fail(ErrorKind::kFormat, where + ": a region needs both class and points");
    if (!cls) continue;
    if (*cls < 1 || *cls > 3) fail(ErrorKind::kData, where + ": class must be 1, 2 or 3");
    regions.push_back({std::move(*pts), label_from_code(*cls)});
  }
  AnnotationSet out(slide.empty() ? set.slide_id() : slide);
  for (auto& r : regions) out.add(std::move(r));
  return out;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing annotations " + path.string());
  return parse_annotations(text::read_file(path), path.stem().string());
}

std::string render_annotations(const AnnotationSet& annotations) {
  std::string out = "# class=<1|2|3>; points=x,y ...\n";
  if (!annotations.slide_id().empty()) out += "slide=" + annotations.slide_id() + "\n";
  for (const Region& r : annotations.regions()) {
    out += "class=" + std::to_string(code(r.label)) + "; points=";
    for (std::size_t i = 0; i < r.polygon.size(); ++i) {
      if (i) out += ' ';
      out += text::format_real(r.polygon[i].x) + "," + text::format_real(r.polygon[i].y);
    }
    out += '\n';
  }
  return out;
}

}  // namespace histo
