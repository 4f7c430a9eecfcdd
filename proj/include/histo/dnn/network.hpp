#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histo/dnn/params.hpp"
#include "histo/dnn/spec.hpp"

namespace histo::dnn {

/// Forward/backward evaluator for one NetworkSpec. `forward` caches every
/// activation the next `backward` call needs; an instance therefore serves
/// one batch at a time, while ParamStore may be shared between instances.
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }

  /// `input` is N×H×W×C row-major. Returns N×classes logits.
  std::vector<T> forward(const ParamStore<T>& params, std::span<const T> input, int batch,
                         int height, int width);

  /// Overwrites `grads` (shaped like the params) with dLoss/dParam for the
  /// cached batch. With head_only, only the fully connected tensors are
  /// written and the pass stops after the head.
  void backward(const ParamStore<T>& params, std::span<const double> dlogits, ParamStore<T>& grads,
                bool head_only = false);

  /// Global-pool features of the cached batch, N × feature_channels.
  std::span<const T> features() const noexcept { return gap_; }

  struct Buffer {
    std::vector<T> v;
    int n = 0, h = 0, w = 0, c = 0;
    void reset(int n_, int h_, int w_, int c_);
  };

 private:
  struct Block {
    Buffer cat;
    std::vector<Buffer> bottleneck;
    Buffer trans;
    std::vector<std::int32_t> pool_index;
  };

  NetworkSpec spec_;
  const ParamStore<T>* cached_params_ = nullptr;
  Buffer input_;
  Buffer stem_;
  std::vector<std::int32_t> stem_pool_index_;
  std::vector<Block> blocks_;
  Buffer final_;
  std::vector<T> gap_;
};

}  // namespace histo::dnn
