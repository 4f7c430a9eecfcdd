#include "histo/patches/grid.hpp"

#include <cmath>

#include "histo/error.hpp"

namespace histo {

namespace {

int centers_along(double length, double offset, double spacing) {
  if (length <= offset) return 0;
  int n = static_cast<int>(std::ceil((length - offset) / spacing));
  while (n > 0 && offset + (n - 1) * spacing >= length) --n;
  while (offset + n * spacing < length) ++n;
  return n;
}

}  // namespace

void GridSpec::validate() const {
  require(spacing > 0.0, "grid spacing must be positive");
  require(origin_offset.x >= 0.0 && origin_offset.x < spacing && origin_offset.y >= 0.0 &&
              origin_offset.y < spacing,
          "grid origin offset must lie in [0, spacing)");
  require(extent.width >= 0.0 && extent.height >= 0.0, "grid extent must be non-negative");
}

int GridSpec::columns() const { return centers_along(extent.width, origin_offset.x, spacing); }

int GridSpec::rows() const { return centers_along(extent.height, origin_offset.y, spacing); }

std::vector<Point> plan_grid(const GridSpec& grid) {
  grid.validate();
  const int cols = grid.columns();
  const int rows = grid.rows();
  std::vector<Point> centers;
  centers.reserve(static_cast<std::size_t>(cols) * rows);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) centers.push_back(grid.center(i, j));
  return centers;
}

std::vector<Point> plan_grid(const Rect& extent, double spacing, Point origin_offset) {
  GridSpec g;
  g.extent = extent;
  g.spacing = spacing;
  g.origin_offset = origin_offset;
  return plan_grid(g);
}

}  // namespace histo
