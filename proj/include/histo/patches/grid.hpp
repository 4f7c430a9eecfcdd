#pragma once

#include <vector>

#include "histo/imaging/geometry.hpp"

namespace histo {

/// Regular grid of patch centers over a level-0 extent.
struct GridSpec {
  Rect extent;
  double spacing = 1.0;
  Point origin_offset;
  double patch_size_level0 = 1.0;

  /// Number of centers along each axis.
  int columns() const;
  int rows() const;
  Point center(int column, int row) const noexcept {
    return {extent.x + origin_offset.x + column * spacing,
            extent.y + origin_offset.y + row * spacing};
  }
  void validate() const;
};

/// Centers at offset + (i, j) * spacing that lie inside `extent`, row-major.
std::vector<Point> plan_grid(const Rect& extent, double spacing, Point origin_offset);
std::vector<Point> plan_grid(const GridSpec& grid);

}  // namespace histo
