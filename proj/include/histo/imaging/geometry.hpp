#pragma once

namespace histo {

/// Continuous level-0 coordinates. A pixel (x, y) covers [x, x+1) × [y, y+1).
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace histo
