#include <algorithm>
#include <vector>

#include "histo/kernels/kernels.hpp"
#include "pixel_math.hpp"

namespace histo::kern::reference {

void resample_bilinear(ImageView src, MutableImageView dst) {
  for (int y = 0; y < dst.height; ++y) {
    const detail::Tap ty = detail::bilinear_tap(y, src.height, dst.height);
    for (int x = 0; x < dst.width; ++x) {
      const detail::Tap tx = detail::bilinear_tap(x, src.width, dst.width);
      detail::bilinear_pixel(src, tx, ty,
                             dst.data + (static_cast<std::size_t>(y) * dst.width + x) * dst.channels);
    }
  }
}

void resample_nearest(ImageView src, MutableImageView dst) {
  const int c = src.channels;
  for (int y = 0; y < dst.height; ++y) {
    const int sy = detail::nearest_tap(y, src.height, dst.height);
    for (int x = 0; x < dst.width; ++x) {
      const int sx = detail::nearest_tap(x, src.width, dst.width);
      const std::uint8_t* p = src.data + (static_cast<std::size_t>(sy) * src.width + sx) * c;
      std::copy(p, p + c, dst.data + (static_cast<std::size_t>(y) * dst.width + x) * c);
    }
  }
}

void saturation_plane(ImageView rgb, std::uint8_t* out) {
  const std::size_t n = static_cast<std::size_t>(rgb.width) * rgb.height;
  for (std::size_t i = 0; i < n; ++i) out[i] = detail::saturation(rgb.data + 3 * i);
}

Histogram256 histogram(std::span<const std::uint8_t> values) {
  Histogram256 h{};
  for (std::uint8_t v : values) ++h[v];
  return h;
}

void median_filter_labels(LabelGridView in, int window, MedianMode mode, std::uint8_t* out) {
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out[static_cast<std::size_t>(y) * in.width + x] =
          detail::window_statistic(in, x, y, window, mode);
}

void dilate_labels(LabelGridView in, int radius, std::uint8_t* out) {
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out[static_cast<std::size_t>(y) * in.width + x] = detail::cross_max(in, x, y, radius);
}

// Convolutions are written in the direct scatter/accumulate form.

template <typename T>
void conv2d_forward(FeatureMap<const T> in, const T* weight, const T* bias, FeatureMap<T> out,
                    ConvGeometry g) {
  const int k = g.kernel;
  const int cin = in.count;
  for (int n = 0; n < out.batch; ++n)
    for (int oy = 0; oy < out.height; ++oy)
      for (int ox = 0; ox < out.width; ++ox)
        for (int oc = 0; oc < out.count; ++oc) {
          T acc = bias ? bias[oc] : T(0);
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= in.width) continue;
              const T* px = in.at(n, iy, ix);
              const T* w = weight + ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
              for (int ic = 0; ic < cin; ++ic) acc += px[ic] * w[ic];
            }
          }
          out.at(n, oy, ox)[oc] = acc;
        }
}

template <typename T>
void conv2d_backward_input(FeatureMap<const T> dout, const T* weight, FeatureMap<T> din,
                           ConvGeometry g) {
  const int k = g.kernel;
  const int cin = din.count;
  for (int n = 0; n < dout.batch; ++n)
    for (int oy = 0; oy < dout.height; ++oy)
      for (int ox = 0; ox < dout.width; ++ox)
        for (int oc = 0; oc < dout.count; ++oc) {
          const T grad = dout.at(n, oy, ox)[oc];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= din.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= din.width) continue;
              T* px = din.at(n, iy, ix);
              const T* w = weight + ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
              for (int ic = 0; ic < cin; ++ic) px[ic] += grad * w[ic];
            }
          }
        }
}

template <typename T>
void conv2d_backward_params(FeatureMap<const T> in, FeatureMap<const T> dout, T* dweight,
                            T* dbias, ConvGeometry g) {
  const int k = g.kernel;
  const int cin = in.count;
  std::fill(dweight, dweight + static_cast<std::size_t>(dout.count) * k * k * cin, T(0));
  if (dbias) std::fill(dbias, dbias + dout.count, T(0));
  for (int n = 0; n < dout.batch; ++n)
    for (int oy = 0; oy < dout.height; ++oy)
      for (int ox = 0; ox < dout.width; ++ox)
        for (int oc = 0; oc < dout.count; ++oc) {
          const T grad = dout.at(n, oy, ox)[oc];
          if (dbias) dbias[oc] += grad;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= in.width) continue;
              const T* px = in.at(n, iy, ix);
              T* w = dweight + ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
              for (int ic = 0; ic < cin; ++ic) w[ic] += grad * px[ic];
            }
          }
        }
}

#define HISTO_INSTANTIATE(T)                                                                    \
  template void conv2d_forward<T>(FeatureMap<const T>, const T*, const T*, FeatureMap<T>,      \
                                  ConvGeometry);                                                \
  template void conv2d_backward_input<T>(FeatureMap<const T>, const T*, FeatureMap<T>,         \
                                         ConvGeometry);                                         \
  template void conv2d_backward_params<T>(FeatureMap<const T>, FeatureMap<const T>, T*, T*,    \
                                          ConvGeometry);
HISTO_INSTANTIATE(float)
HISTO_INSTANTIATE(double)
#undef HISTO_INSTANTIATE

}  // namespace histo::kern::reference
