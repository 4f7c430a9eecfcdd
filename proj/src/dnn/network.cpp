#include "histo/dnn/network.hpp"

#include <algorithm>
#include <limits>

#include "histo/error.hpp"
#include "histo/kernels/kernels.hpp"

namespace histo::dnn {

namespace {

using kern::ConvGeometry;
using kern::FeatureMap;

template <typename T>
FeatureMap<T> slice(typename Network<T>::Buffer& b, int offset, int count) {
  return {b.v.data(), b.n, b.h, b.w, b.c, offset, count};
}
template <typename T>
FeatureMap<T> whole(typename Network<T>::Buffer& b) {
  return slice<T>(b, 0, b.c);
}
template <typename T>
FeatureMap<const T> as_const(FeatureMap<T> m) {
  return {m.data, m.batch, m.height, m.width, m.pitch, m.offset, m.count};
}

template <typename T>
void relu_inplace(FeatureMap<T> m) {
  const int rows = m.batch * m.height;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    for (int x = 0; x < m.width; ++x) {
      T* p = m.at(r / m.height, r % m.height, x);
      for (int c = 0; c < m.count; ++c) p[c] = std::max(p[c], T(0));
    }
}

/// grad *= (act > 0)
template <typename T>
void relu_mask(FeatureMap<T> grad, FeatureMap<const T> act) {
  const int rows = grad.batch * grad.height;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    for (int x = 0; x < grad.width; ++x) {
      T* g = grad.at(r / grad.height, r % grad.height, x);
      const T* a = act.at(r / grad.height, r % grad.height, x);
      for (int c = 0; c < grad.count; ++c)
        if (!(a[c] > T(0))) g[c] = T(0);
    }
}

/// Max pooling over valid window positions; records the flat spatial index
/// of the first maximum per output element.
template <typename T>
void max_pool_forward(FeatureMap<const T> in, FeatureMap<T> out, ConvGeometry g,
                      std::int32_t* index) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out.batch * out.height; ++r) {
    const int n = r / out.height, oy = r % out.height;
    for (int ox = 0; ox < out.width; ++ox)
      for (int c = 0; c < out.count; ++c) {
        T best = -std::numeric_limits<T>::infinity();
        std::int32_t arg = -1;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= in.width) continue;
            const T v = in.at(n, iy, ix)[c];
            if (arg < 0 || v > best) {
              best = v;
              arg = iy * in.width + ix;
            }
          }
        }
        out.at(n, oy, ox)[c] = best;
        index[(static_cast<std::size_t>(r) * out.width + ox) * out.count + c] = arg;
      }
  }
}

template <typename T>
void max_pool_backward(FeatureMap<const T> dout, const std::int32_t* index, FeatureMap<T> din) {
#pragma omp parallel for schedule(static)
  for (int n = 0; n < dout.batch; ++n)
    for (int oy = 0; oy < dout.height; ++oy)
      for (int ox = 0; ox < dout.width; ++ox)
        for (int c = 0; c < dout.count; ++c) {
          const std::size_t o =
              ((static_cast<std::size_t>(n) * dout.height + oy) * dout.width + ox) * dout.count + c;
          const int arg = index[o];
          din.at(n, arg / din.width, arg % din.width)[c] += dout.at(n, oy, ox)[c];
        }
}

template <typename T>
void avg_pool2_forward(FeatureMap<const T> in, FeatureMap<T> out) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out.batch * out.height; ++r) {
    const int n = r / out.height, oy = r % out.height;
    for (int ox = 0; ox < out.width; ++ox)
      for (int c = 0; c < out.count; ++c)
        out.at(n, oy, ox)[c] =
            (in.at(n, 2 * oy, 2 * ox)[c] + in.at(n, 2 * oy, 2 * ox + 1)[c] +
             in.at(n, 2 * oy + 1, 2 * ox)[c] + in.at(n, 2 * oy + 1, 2 * ox + 1)[c]) /
            T(4);
  }
}

template <typename T>
void avg_pool2_backward(FeatureMap<const T> dout, FeatureMap<T> din) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < dout.batch * dout.height; ++r) {
    const int n = r / dout.height, oy = r % dout.height;
    for (int ox = 0; ox < dout.width; ++ox)
      for (int c = 0; c < dout.count; ++c) {
        const T g = dout.at(n, oy, ox)[c] / T(4);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) din.at(n, 2 * oy + dy, 2 * ox + dx)[c] += g;
      }
  }
}

constexpr ConvGeometry kStem{7, 2, 3};
constexpr ConvGeometry kStemPool{3, 2, 1};
constexpr ConvGeometry kPointwise{1, 1, 0};
constexpr ConvGeometry kSpatial{3, 1, 1};
constexpr ConvGeometry kTransitionPool{2, 2, 0};

}  // namespace

template <typename T>
void Network<T>::Buffer::reset(int n_, int h_, int w_, int c_) {
  n = n_;
  h = h_;
  w = w_;
  c = c_;
  v.assign(static_cast<std::size_t>(n) * h * w * c, T(0));
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

template <typename T>
std::vector<T> Network<T>::forward(const ParamStore<T>& params, std::span<const T> input,
                                   int batch, int height, int width) {
  require(batch > 0, "forward needs a non-empty batch");
  require(input.size() ==
              static_cast<std::size_t>(batch) * height * width * spec_.input_channels,
          "input tensor size does not match N×H×W×C");
  const auto shapes = describe_shapes(spec_, height, width);  // rejects spatial underflow
  params.check_matches(spec_);
  cached_params_ = &params;

  using kern::parallel::conv2d_forward;
  std::size_t p = 0;
  auto weight = [&]() { return params[p].data.data(); };
  auto bias = [&]() { return params[p + 1].data.data(); };

  input_.reset(batch, height, width, spec_.input_channels);
  std::copy(input.begin(), input.end(), input_.v.begin());

  stem_.reset(batch, shapes[1].height, shapes[1].width, spec_.initial_channels);
  conv2d_forward<T>(as_const(whole<T>(input_)), weight(), bias(), whole<T>(stem_), kStem);
  relu_inplace(whole<T>(stem_));
  p += 2;

  const int nb = static_cast<int>(spec_.block_layers.size());
  blocks_.resize(nb);
  const int g = spec_.growth_rate;
  const int bn = spec_.bottleneck_channels();

  // Each pooling stage writes straight into the first channels of the next
  // block's concatenation buffer.
  blocks_[0].cat.reset(batch, shapes[2].height, shapes[2].width, spec_.block_output_channels(0));
  stem_pool_index_.assign(static_cast<std::size_t>(batch) * shapes[2].height * shapes[2].width *
                              spec_.initial_channels,
                          0);
  max_pool_forward(as_const(whole<T>(stem_)), slice<T>(blocks_[0].cat, 0, spec_.initial_channels),
                   kStemPool, stem_pool_index_.data());

  for (int b = 0; b < nb; ++b) {
    Block& blk = blocks_[b];
    const int cin = spec_.block_input_channels(b);
    blk.bottleneck.resize(spec_.block_layers[b]);
    for (int l = 0; l < spec_.block_layers[b]; ++l) {
      const int off = cin + l * g;
      Buffer& mid = blk.bottleneck[l];
      mid.reset(batch, blk.cat.h, blk.cat.w, bn);
      conv2d_forward<T>(as_const(slice<T>(blk.cat, 0, off)), weight(), bias(), whole<T>(mid),
                        kPointwise);
      relu_inplace(whole<T>(mid));
      p += 2;
      conv2d_forward<T>(as_const(whole<T>(mid)), weight(), bias(), slice<T>(blk.cat, off, g),
                        kSpatial);
      relu_inplace(slice<T>(blk.cat, off, g));
      p += 2;
    }
    const int tc = spec_.transition_output_channels(b);
    blk.trans.reset(batch, blk.cat.h, blk.cat.w, tc);
    conv2d_forward<T>(as_const(whole<T>(blk.cat)), weight(), bias(), whole<T>(blk.trans),
                      kPointwise);
    relu_inplace(whole<T>(blk.trans));
    p += 2;

    Buffer* next;
    if (b + 1 < nb) {
      blocks_[b + 1].cat.reset(batch, blk.cat.h / 2, blk.cat.w / 2,
                               spec_.block_output_channels(b + 1));
      next = &blocks_[b + 1].cat;
    } else {
      final_.reset(batch, blk.cat.h / 2, blk.cat.w / 2, tc);
      next = &final_;
    }
    if (spec_.transition_pool == PoolKind::kMax) {
      blk.pool_index.assign(static_cast<std::size_t>(batch) * next->h * next->w * tc, 0);
      max_pool_forward(as_const(whole<T>(blk.trans)), slice<T>(*next, 0, tc), kTransitionPool,
                       blk.pool_index.data());
    } else {
      avg_pool2_forward(as_const(whole<T>(blk.trans)), slice<T>(*next, 0, tc));
    }
  }

  const int f = spec_.feature_channels();
  const int hw = final_.h * final_.w;
  gap_.assign(static_cast<std::size_t>(batch) * f, T(0));
  for (int n = 0; n < batch; ++n)
    for (int s = 0; s < hw; ++s) {
      const T* px = final_.v.data() + (static_cast<std::size_t>(n) * hw + s) * f;
      for (int c = 0; c < f; ++c) gap_[static_cast<std::size_t>(n) * f + c] += px[c];
    }
  for (auto& v : gap_) v /= static_cast<T>(hw);

  const int k = spec_.num_classes;
  const T* fw = weight();
  const T* fb = bias();
  std::vector<T> logits(static_cast<std::size_t>(batch) * k);
  for (int n = 0; n < batch; ++n)
    for (int j = 0; j < k; ++j) {
      T acc = fb[j];
      const T* row = fw + static_cast<std::size_t>(j) * f;
      const T* x = gap_.data() + static_cast<std::size_t>(n) * f;
      for (int c = 0; c < f; ++c) acc += row[c] * x[c];
      logits[static_cast<std::size_t>(n) * k + j] = acc;
    }
  return logits;
}

template <typename T>
void Network<T>::backward(const ParamStore<T>& params, std::span<const double> dlogits,
                          ParamStore<T>& grads, bool head_only) {
  if (cached_params_ != &params)
    fail(ErrorKind::kInvalidArgument, "backward called without a matching forward pass");
  const int batch = input_.n;
  const int k = spec_.num_classes;
  const int f = spec_.feature_channels();
  if (dlogits.size() != static_cast<std::size_t>(batch) * k)
    fail(ErrorKind::kInvalidArgument, "loss gradient does not match the cached batch");
  grads.check_matches(spec_);

  using kern::parallel::conv2d_backward_input;
  using kern::parallel::conv2d_backward_params;

  // Head.
  std::size_t p = params.size() - 2;
  {
    T* dw = grads[p].data.data();
    T* db = grads[p + 1].data.data();
    std::fill(dw, dw + static_cast<std::size_t>(k) * f, T(0));
    std::fill(db, db + k, T(0));
    for (int n = 0; n < batch; ++n)
      for (int j = 0; j < k; ++j) {
        const T d = static_cast<T>(dlogits[static_cast<std::size_t>(n) * k + j]);
        db[j] += d;
        const T* x = gap_.data() + static_cast<std::size_t>(n) * f;
        T* row = dw + static_cast<std::size_t>(j) * f;
        for (int c = 0; c < f; ++c) row[c] += d * x[c];
      }
  }
  if (head_only) return;

  Buffer dfinal;
  dfinal.reset(batch, final_.h, final_.w, f);
  {
    const T* fw = params[p].data.data();
    const int hw = final_.h * final_.w;
    for (int n = 0; n < batch; ++n)
      for (int c = 0; c < f; ++c) {
        T acc = T(0);
        for (int j = 0; j < k; ++j)
          acc += static_cast<T>(dlogits[static_cast<std::size_t>(n) * k + j]) *
                 fw[static_cast<std::size_t>(j) * f + c];
        acc /= static_cast<T>(hw);
        for (int s = 0; s < hw; ++s)
          dfinal.v[(static_cast<std::size_t>(n) * hw + s) * f + c] = acc;
      }
  }

  const int nb = static_cast<int>(spec_.block_layers.size());
  const int g = spec_.growth_rate;
  const int bn = spec_.bottleneck_channels();

  // Parameter index of the transition of block b is computed by walking
  // backwards from the head.
  Buffer dnext_cat;  // gradient of the concatenation buffer of block b + 1
  for (int b = nb - 1; b >= 0; --b) {
    Block& blk = blocks_[b];
    const int cin = spec_.block_input_channels(b);
    const int tc = spec_.transition_output_channels(b);

    FeatureMap<T> dpooled = b + 1 < nb ? slice<T>(dnext_cat, 0, tc) : whole<T>(dfinal);
    Buffer dtrans;
    dtrans.reset(batch, blk.trans.h, blk.trans.w, tc);
    if (spec_.transition_pool == PoolKind::kMax)
      max_pool_backward(as_const(dpooled), blk.pool_index.data(), whole<T>(dtrans));
    else
      avg_pool2_backward(as_const(dpooled), whole<T>(dtrans));
    relu_mask(whole<T>(dtrans), as_const(whole<T>(blk.trans)));

    p -= 2;  // transition conv
    Buffer dcat;
    dcat.reset(batch, blk.cat.h, blk.cat.w, blk.cat.c);
    conv2d_backward_params<T>(as_const(whole<T>(blk.cat)), as_const(whole<T>(dtrans)),
                              grads[p].data.data(), grads[p + 1].data.data(), kPointwise);
    conv2d_backward_input<T>(as_const(whole<T>(dtrans)), params[p].data.data(), whole<T>(dcat),
                             kPointwise);

    for (int l = spec_.block_layers[b] - 1; l >= 0; --l) {
      const int off = cin + l * g;
      // Every consumer of this layer's output (later layers and the
      // transition) has already added its share to dcat.
      relu_mask(slice<T>(dcat, off, g), as_const(slice<T>(blk.cat, off, g)));
      Buffer& mid = blk.bottleneck[l];

      p -= 2;  // conv2
      Buffer dmid;
      dmid.reset(batch, mid.h, mid.w, bn);
      conv2d_backward_params<T>(as_const(whole<T>(mid)), as_const(slice<T>(dcat, off, g)),
                                grads[p].data.data(), grads[p + 1].data.data(), kSpatial);
      conv2d_backward_input<T>(as_const(slice<T>(dcat, off, g)), params[p].data.data(),
                               whole<T>(dmid), kSpatial);
      relu_mask(whole<T>(dmid), as_const(whole<T>(mid)));

      p -= 2;  // conv1
      conv2d_backward_params<T>(as_const(slice<T>(blk.cat, 0, off)), as_const(whole<T>(dmid)),
                                grads[p].data.data(), grads[p + 1].data.data(), kPointwise);
      conv2d_backward_input<T>(as_const(whole<T>(dmid)), params[p].data.data(),
                               slice<T>(dcat, 0, off), kPointwise);
    }
    dnext_cat = std::move(dcat);
  }

  Buffer dstem;
  dstem.reset(batch, stem_.h, stem_.w, stem_.c);
  max_pool_backward(as_const(slice<T>(dnext_cat, 0, spec_.initial_channels)),
                    stem_pool_index_.data(), whole<T>(dstem));
  relu_mask(whole<T>(dstem), as_const(whole<T>(stem_)));
  p -= 2;
  conv2d_backward_params<T>(as_const(whole<T>(input_)), as_const(whole<T>(dstem)),
                            grads[p].data.data(), grads[p + 1].data.data(), kStem);
  if (p != 0) fail(ErrorKind::kInvalidArgument, "internal parameter bookkeeping mismatch");
}

template class Network<float>;
template class Network<double>;

}  // namespace histo::dnn
