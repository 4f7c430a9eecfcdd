#pragma once

// Data-parallel inner loops. Each kernel exists twice: `reference` is the
// plain serial formulation kept as a test oracle and benchmark baseline,
// `parallel` is the OpenMP version the library calls. Parallel kernels write
// disjoint outputs and reduce in a fixed order, so their results do not
// depend on the thread count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace histo::kern {

/// Read-only interleaved 8-bit image.
struct ImageView {
  const std::uint8_t* data = nullptr;
  int width = 0;
  int height = 0;
  int channels = 0;
};

struct MutableImageView {
  std::uint8_t* data = nullptr;
  int width = 0;
  int height = 0;
  int channels = 0;
};

/// Grid of label codes, row-major.
struct LabelGridView {
  const std::uint8_t* data = nullptr;
  int width = 0;
  int height = 0;
};

/// A channel slice [offset, offset + count) of an NHWC tensor whose
/// innermost dimension has `pitch` channels. Dense blocks address their
/// growing concatenated feature buffer through these slices.
template <typename T>
struct FeatureMap {
  T* data = nullptr;
  int batch = 0;
  int height = 0;
  int width = 0;
  int pitch = 0;
  int offset = 0;
  int count = 0;

  T* at(int n, int y, int x) const noexcept {
    return data + ((static_cast<std::size_t>(n) * height + y) * width + x) * pitch + offset;
  }
};

struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int output_extent(int input) const noexcept { return (input + 2 * pad - kernel) / stride + 1; }
};

using Histogram256 = std::array<std::uint64_t, 256>;

enum class MedianMode { kOrdinal, kMajority };

namespace reference {
void resample_bilinear(ImageView src, MutableImageView dst);
void resample_nearest(ImageView src, MutableImageView dst);
void saturation_plane(ImageView rgb, std::uint8_t* out);
Histogram256 histogram(std::span<const std::uint8_t> values);
void median_filter_labels(LabelGridView in, int window, MedianMode mode, std::uint8_t* out);
void dilate_labels(LabelGridView in, int radius, std::uint8_t* out);

/// out = conv(in) + bias. Weight layout is [out_c][k][k][in_c].
template <typename T>
void conv2d_forward(FeatureMap<const T> in, const T* weight, const T* bias, FeatureMap<T> out,
                    ConvGeometry g);

/// din += transposed convolution of dout.
template <typename T>
void conv2d_backward_input(FeatureMap<const T> dout, const T* weight, FeatureMap<T> din,
                           ConvGeometry g);

/// dweight and dbias are overwritten.
template <typename T>
void conv2d_backward_params(FeatureMap<const T> in, FeatureMap<const T> dout, T* dweight,
                            T* dbias, ConvGeometry g);
}  // namespace reference

namespace parallel {
void resample_bilinear(ImageView src, MutableImageView dst);
void resample_nearest(ImageView src, MutableImageView dst);
void saturation_plane(ImageView rgb, std::uint8_t* out);
Histogram256 histogram(std::span<const std::uint8_t> values);
void median_filter_labels(LabelGridView in, int window, MedianMode mode, std::uint8_t* out);
void dilate_labels(LabelGridView in, int radius, std::uint8_t* out);

template <typename T>
void conv2d_forward(FeatureMap<const T> in, const T* weight, const T* bias, FeatureMap<T> out,
                    ConvGeometry g);
template <typename T>
void conv2d_backward_input(FeatureMap<const T> dout, const T* weight, FeatureMap<T> din,
                           ConvGeometry g);
template <typename T>
void conv2d_backward_params(FeatureMap<const T> in, FeatureMap<const T> dout, T* dweight,
                            T* dbias, ConvGeometry g);
}  // namespace parallel

/// Cap on OpenMP worker threads for all parallel kernels; 0 restores the
/// runtime default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace histo::kern
