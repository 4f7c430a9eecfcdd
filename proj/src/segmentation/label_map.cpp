#include "histo/segmentation/label_map.hpp"

#include <cmath>

#include "histo/error.hpp"

namespace histo {

void LabelMap::validate() const {
  if (width < 0 || height < 0) fail(ErrorKind::kData, "label map has negative dimensions");
  if (cells.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::kData, "label map cell count does not match its dimensions");
  for (auto c : cells)
    if (!is_valid_label_code(c)) fail(ErrorKind::kData, "label map cell holds an invalid class");
  if (cell_stride_pixels <= 0 || !(classifier_downsample > 0.0))
    fail(ErrorKind::kData, "label map downsample bookkeeping is not positive");
  const double expected = cell_stride_pixels * classifier_downsample;
  if (std::abs(expected - total_downsample) > 1e-9 * expected)
    fail(ErrorKind::kData, "label map total downsample != stride * classifier downsample");
}

}  // namespace histo
