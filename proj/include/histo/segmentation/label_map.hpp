#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histo/imaging/label.hpp"

namespace histo {

/// Per-grid-cell class raster. One cell spans `cell_stride_pixels` pixels of
/// the classifier-resolution raster, i.e. `total_downsample` level-0 pixels.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;
  int cell_stride_pixels = 32;
  double classifier_downsample = 4.5;
  double total_downsample = 144.0;
  std::string slide_id;

  LabelMap() = default;
  LabelMap(int w, int h, LabelClass fill = LabelClass::kNormal)
      : width(w), height(h), cells(static_cast<std::size_t>(w) * h, code(fill)) {}

  LabelClass at(int x, int y) const noexcept {
    return label_from_code(cells[static_cast<std::size_t>(y) * width + x]);
  }
  void set(int x, int y, LabelClass c) noexcept {
    cells[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(code(c));
  }

  /// Throws if a cell is out of range or the downsample bookkeeping disagrees.
  void validate() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

}  // namespace histo
