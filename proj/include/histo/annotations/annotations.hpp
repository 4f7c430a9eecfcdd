#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histo/imaging/geometry.hpp"
#include "histo/imaging/label.hpp"
#include "histo/patches/grid.hpp"
#include "histo/segmentation/label_map.hpp"

namespace histo {

/// Closed polygon in level-0 pixel coordinates with a non-normal class.
struct Region {
  std::vector<Point> polygon;
  LabelClass label = LabelClass::kBenign;
};

enum class UnannotatedPolicy { kNormal, kExclude };

/// Even-odd containment with half-open edges: a point on an edge at the
/// larger y (or larger x) of the polygon is outside.
bool point_in_polygon(std::span<const Point> polygon, Point p) noexcept;

/// Signed shoelace area.
double polygon_area(std::span<const Point> polygon) noexcept;

class AnnotationSet {
 public:
  AnnotationSet() = default;
  explicit AnnotationSet(std::string slide_id, std::vector<Region> regions = {});

  const std::string& slide_id() const noexcept { return slide_id_; }
  std::span<const Region> regions() const noexcept { return regions_; }
  bool empty() const noexcept { return regions_.empty(); }

  void add(Region region);

  /// Highest class among regions containing `p`; nullopt if none does.
  std::optional<LabelClass> lookup(Point p) const noexcept;

  /// Unannotated points are normal.
  LabelClass class_at_point(Point p) const noexcept {
    return lookup(p).value_or(LabelClass::kNormal);
  }

 private:
  struct Bounds {
    double x0, y0, x1, y1;
  };
  std::string slide_id_;
  std::vector<Region> regions_;
  std::vector<Bounds> bounds_;
};

/// Label map with class_at_point evaluated at every grid center.
LabelMap rasterize(const AnnotationSet& annotations, const GridSpec& grid,
                   int cell_stride_pixels = 32);

/// Line format: `class=<1|2|3>; points=x0,y0 x1,y1 ...`, with optional
/// `slide=<id>` and `#` comments.
AnnotationSet parse_annotations(std::string_view contents, std::string default_slide_id);
AnnotationSet load_annotations(const std::filesystem::path& path);
std::string render_annotations(const AnnotationSet& annotations);

}  // namespace histo
