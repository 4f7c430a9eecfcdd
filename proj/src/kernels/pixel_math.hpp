#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "histo/kernels/kernels.hpp"

namespace histo::kern::detail {

/// Source coordinate for output index `i` when mapping `src_extent` samples
/// onto `dst_extent` samples with pixel centers aligned.
inline double source_coordinate(int i, int src_extent, int dst_extent) noexcept {
  const double scale = static_cast<double>(src_extent) / dst_extent;
  return (i + 0.5) * scale - 0.5;
}

inline std::uint8_t to_u8(double v) noexcept {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

struct Tap {
  int i0;
  int i1;
  double frac;
};

inline Tap bilinear_tap(int i, int src_extent, int dst_extent) noexcept {
  double s = source_coordinate(i, src_extent, dst_extent);
  s = std::clamp(s, 0.0, static_cast<double>(src_extent - 1));
  const int i0 = static_cast<int>(std::floor(s));
  const int i1 = std::min(i0 + 1, src_extent - 1);
  return {i0, i1, s - i0};
}

inline int nearest_tap(int i, int src_extent, int dst_extent) noexcept {
  const double scale = static_cast<double>(src_extent) / dst_extent;
  const int s = static_cast<int>(std::floor((i + 0.5) * scale));
  return std::clamp(s, 0, src_extent - 1);
}

inline void bilinear_pixel(ImageView src, const Tap& tx, const Tap& ty, std::uint8_t* out) noexcept {
  const int c = src.channels;
  const std::uint8_t* r0 = src.data + static_cast<std::size_t>(ty.i0) * src.width * c;
  const std::uint8_t* r1 = src.data + static_cast<std::size_t>(ty.i1) * src.width * c;
  for (int k = 0; k < c; ++k) {
    const double top = (1.0 - tx.frac) * r0[tx.i0 * c + k] + tx.frac * r0[tx.i1 * c + k];
    const double bottom = (1.0 - tx.frac) * r1[tx.i0 * c + k] + tx.frac * r1[tx.i1 * c + k];
    out[k] = to_u8((1.0 - ty.frac) * top + ty.frac * bottom);
  }
}

inline std::uint8_t saturation(const std::uint8_t* rgb) noexcept {
  const int mx = std::max({rgb[0], rgb[1], rgb[2]});
  const int mn = std::min({rgb[0], rgb[1], rgb[2]});
  if (mx == 0) return 0;
  return static_cast<std::uint8_t>(((mx - mn) * 255 + mx / 2) / mx);
}

/// Median (or mode) of the window around (x, y) with edge replication.
inline std::uint8_t window_statistic(LabelGridView in, int x, int y, int window,
                                     MedianMode mode) noexcept {
  const int r = window / 2;
  std::array<int, 256> counts{};
  int hi = 0;
  for (int dy = -r; dy <= r; ++dy) {
    const int yy = std::clamp(y + dy, 0, in.height - 1);
    const std::uint8_t* row = in.data + static_cast<std::size_t>(yy) * in.width;
    for (int dx = -r; dx <= r; ++dx) {
      const int v = row[std::clamp(x + dx, 0, in.width - 1)];
      ++counts[v];
      hi = std::max(hi, v);
    }
  }
  if (mode == MedianMode::kMajority) {
    int best = 0;
    for (int v = 1; v <= hi; ++v)
      if (counts[v] > counts[best]) best = v;
    return static_cast<std::uint8_t>(best);
  }
  const int need = (window * window + 1) / 2;
  int seen = 0;
  for (int v = 0; v <= hi; ++v) {
    seen += counts[v];
    if (seen >= need) return static_cast<std::uint8_t>(v);
  }
  return static_cast<std::uint8_t>(hi);
}

/// Largest label on the plus-shaped neighborhood of arm length `radius`.
inline std::uint8_t cross_max(LabelGridView in, int x, int y, int radius) noexcept {
  const std::uint8_t* row = in.data + static_cast<std::size_t>(y) * in.width;
  std::uint8_t m = row[x];
  for (int d = 1; d <= radius; ++d) {
    if (x - d >= 0) m = std::max(m, row[x - d]);
    if (x + d < in.width) m = std::max(m, row[x + d]);
    if (y - d >= 0) m = std::max(m, in.data[static_cast<std::size_t>(y - d) * in.width + x]);
    if (y + d < in.height) m = std::max(m, in.data[static_cast<std::size_t>(y + d) * in.width + x]);
  }
  return m;
}

}  // namespace histo::kern::detail
