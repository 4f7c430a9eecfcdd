#include <omp.h>

#include <algorithm>
#include <vector>

#include "histo/kernels/kernels.hpp"
#include "pixel_math.hpp"

namespace histo::kern {

namespace {
int g_thread_limit = 0;
}

void set_thread_limit(int threads) {
  g_thread_limit = std::max(threads, 0);
  omp_set_num_threads(g_thread_limit > 0 ? g_thread_limit : omp_get_num_procs());
}

int thread_limit() { return g_thread_limit; }

namespace parallel {

void resample_bilinear(ImageView src, MutableImageView dst) {
  std::vector<detail::Tap> xtaps(dst.width);
  for (int x = 0; x < dst.width; ++x) xtaps[x] = detail::bilinear_tap(x, src.width, dst.width);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < dst.height; ++y) {
    const detail::Tap ty = detail::bilinear_tap(y, src.height, dst.height);
    std::uint8_t* row = dst.data + static_cast<std::size_t>(y) * dst.width * dst.channels;
    for (int x = 0; x < dst.width; ++x)
      detail::bilinear_pixel(src, xtaps[x], ty, row + static_cast<std::size_t>(x) * dst.channels);
  }
}

void resample_nearest(ImageView src, MutableImageView dst) {
  const int c = src.channels;
#pragma omp parallel for schedule(static)
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
  const std::int64_t n = static_cast<std::int64_t>(rgb.width) * rgb.height;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = detail::saturation(rgb.data + 3 * i);
}

Histogram256 histogram(std::span<const std::uint8_t> values) {
  Histogram256 total{};
  const std::int64_t n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    Histogram256 local{};
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) ++local[values[i]];
    // Integer sums commute, so merge order does not matter.
#pragma omp critical
    for (int b = 0; b < 256; ++b) total[b] += local[b];
  }
  return total;
}

void median_filter_labels(LabelGridView in, int window, MedianMode mode, std::uint8_t* out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out[static_cast<std::size_t>(y) * in.width + x] =
          detail::window_statistic(in, x, y, window, mode);
}

void dilate_labels(LabelGridView in, int radius, std::uint8_t* out) {
#pragma omp parallel for schedule(static)
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      out[static_cast<std::size_t>(y) * in.width + x] = detail::cross_max(in, x, y, radius);
}

template <typename T>
void conv2d_forward(FeatureMap<const T> in, const T* weight, const T* bias, FeatureMap<T> out,
                    ConvGeometry g) {
  const int k = g.kernel;
  const int cin = in.count;
  const int rows = out.batch * out.height;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int n = r / out.height;
    const int oy = r % out.height;
    for (int ox = 0; ox < out.width; ++ox) {
      T* dst = out.at(n, oy, ox);
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
        dst[oc] = acc;
      }
    }
  }
}

// Gather form: every input pixel collects the output gradients that touched
// it, so rows of din are written by exactly one thread.
template <typename T>
void conv2d_backward_input(FeatureMap<const T> dout, const T* weight, FeatureMap<T> din,
                           ConvGeometry g) {
  const int k = g.kernel;
  const int cin = din.count;
  const int rows = din.batch * din.height;
#pragma omp parallel
  {
    std::vector<T> acc(cin);
#pragma omp for schedule(static)
    for (int r = 0; r < rows; ++r) {
      const int n = r / din.height;
      const int iy = r % din.height;
      for (int ix = 0; ix < din.width; ++ix) {
        std::fill(acc.begin(), acc.end(), T(0));
        for (int ky = 0; ky < k; ++ky) {
          const int ty = iy + g.pad - ky;
          if (ty < 0 || ty % g.stride != 0) continue;
          const int oy = ty / g.stride;
          if (oy >= dout.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int tx = ix + g.pad - kx;
            if (tx < 0 || tx % g.stride != 0) continue;
            const int ox = tx / g.stride;
            if (ox >= dout.width) continue;
            const T* grad = dout.at(n, oy, ox);
            for (int oc = 0; oc < dout.count; ++oc) {
              const T gv = grad[oc];
              const T* w = weight + ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
              for (int ic = 0; ic < cin; ++ic) acc[ic] += gv * w[ic];
            }
          }
        }
        T* px = din.at(n, iy, ix);
        for (int ic = 0; ic < cin; ++ic) px[ic] += acc[ic];
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(FeatureMap<const T> in, FeatureMap<const T> dout, T* dweight,
                            T* dbias, ConvGeometry g) {
  const int k = g.kernel;
  const int cin = in.count;
  const std::size_t per_oc = static_cast<std::size_t>(k) * k * cin;
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < dout.count; ++oc) {
    T* wrow = dweight + oc * per_oc;
    std::fill(wrow, wrow + per_oc, T(0));
    T bsum = T(0);
    for (int n = 0; n < dout.batch; ++n)
      for (int oy = 0; oy < dout.height; ++oy)
        for (int ox = 0; ox < dout.width; ++ox) {
          const T grad = dout.at(n, oy, ox)[oc];
          bsum += grad;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= in.width) continue;
              const T* px = in.at(n, iy, ix);
              T* w = wrow + (static_cast<std::size_t>(ky) * k + kx) * cin;
              for (int ic = 0; ic < cin; ++ic) w[ic] += grad * px[ic];
            }
          }
        }
    if (dbias) dbias[oc] = bsum;
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

}  // namespace parallel
}  // namespace histo::kern
