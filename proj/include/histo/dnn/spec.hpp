#pragma once

#include <string>
#include <vector>

namespace histo::dnn {

enum class PoolKind { kMax, kAverage };

/// Densely connected network: 7×7/2 stem conv, 3×3/2 max pool, then per
/// block L dense layers (1×1 bottleneck conv → 3×3 conv, each followed by
/// ReLU, outputs concatenated) and a transition (1×1 conv + ReLU + 2×2/2
/// pool), then global average pooling and one fully connected layer.
struct NetworkSpec {
  int input_channels = 3;
  int initial_channels = 96;
  int growth_rate = 48;
  std::vector<int> block_layers = {6, 12, 36, 24};
  /// Bottleneck width is bottleneck_factor × growth_rate.
  int bottleneck_factor = 4;
  /// Channel reduction of transitions between blocks. The final transition
  /// keeps its channel count so the classifier sees the last block's width.
  double compression = 0.5;
  PoolKind transition_pool = PoolKind::kMax;
  int num_classes = 4;

  /// Structural checks before any allocation.
  void validate() const;

  int bottleneck_channels() const noexcept { return bottleneck_factor * growth_rate; }
  /// Channels entering block b.
  int block_input_channels(int block) const;
  int block_output_channels(int block) const;
  int transition_output_channels(int block) const;
  /// Width of the global-pool feature vector.
  int feature_channels() const;

  /// DenseNet-161 descriptor: growth 48, blocks 6/12/36/24, 96 initial
  /// channels, 2208 features at the head.
  static NetworkSpec densenet161();
  /// Small configuration for tests and fixtures.
  static NetworkSpec toy(int growth_rate = 4, std::vector<int> blocks = {2, 2},
                         int initial_channels = 16);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct StageShape {
  std::string name;
  int height = 0;
  int width = 0;
  int channels = 0;
};

/// Output shape of every stage for an input of the given size. Throws naming
/// the first stage whose output would be empty.
std::vector<StageShape> describe_shapes(const NetworkSpec& spec, int height, int width);

/// Number of spatial reductions (stem conv, stem pool, one per transition).
int spatial_reductions(const NetworkSpec& spec) noexcept;

}  // namespace histo::dnn
