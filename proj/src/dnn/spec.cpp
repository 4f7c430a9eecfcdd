#include "histo/dnn/spec.hpp"

#include <cmath>

#include "histo/error.hpp"

namespace histo::dnn {

void NetworkSpec::validate() const {
  require(input_channels > 0, "input channels must be positive");
  require(initial_channels > 0, "initial channels must be positive");
  require(growth_rate > 0, "growth rate must be positive");
  require(bottleneck_factor > 0, "bottleneck factor must be positive");
  require(!block_layers.empty(), "network needs at least one dense block");
  for (int l : block_layers) require(l > 0, "every dense block needs at least one layer");
  require(compression > 0.0 && compression <= 1.0, "compression must lie in (0, 1]");
  require(num_classes >= 2, "network needs at least two classes");
  for (std::size_t b = 0; b + 1 < block_layers.size(); ++b)
    require(transition_output_channels(static_cast<int>(b)) > 0,
            "transition " + std::to_string(b + 1) + " compresses to zero channels");
}

int NetworkSpec::block_input_channels(int block) const {
  require(block >= 0 && block < static_cast<int>(block_layers.size()), "block index out of range");
  return block == 0 ? initial_channels : transition_output_channels(block - 1);
}

int NetworkSpec::block_output_channels(int block) const {
  return block_input_channels(block) + block_layers[block] * growth_rate;
}

int NetworkSpec::transition_output_channels(int block) const {
  const int in = block_output_channels(block);
  if (block + 1 == static_cast<int>(block_layers.size())) return in;
  return static_cast<int>(std::floor(in * compression));
}

int NetworkSpec::feature_channels() const {
  return transition_output_channels(static_cast<int>(block_layers.size()) - 1);
}

NetworkSpec NetworkSpec::densenet161() { return NetworkSpec{}; }

NetworkSpec NetworkSpec::toy(int growth_rate, std::vector<int> blocks, int initial_channels) {
  NetworkSpec s;
  s.growth_rate = growth_rate;
  s.block_layers = std::move(blocks);
  s.initial_channels = initial_channels;
  return s;
}

int spatial_reductions(const NetworkSpec& spec) noexcept {
  return 2 + static_cast<int>(spec.block_layers.size());
}

std::vector<StageShape> describe_shapes(const NetworkSpec& spec, int height, int width) {
  spec.validate();
  require(height > 0 && width > 0, "input must be non-empty");
  std::vector<StageShape> out;
  out.push_back({"input", height, width, spec.input_channels});
  auto push = [&](std::string name, int h, int w, int c) {
    if (h < 1 || w < 1)
      fail(ErrorKind::kInvalidArgument,
           "input " + std::to_string(height) + "x" + std::to_string(width) +
               " is too small: stage '" + name + "' would have an empty output");
    out.push_back({std::move(name), h, w, c});
  };
  int h = (height + 6 - 7) / 2 + 1;
  int w = (width + 6 - 7) / 2 + 1;
  push("stem_conv", h, w, spec.initial_channels);
  h = (h + 2 - 3) / 2 + 1;
  w = (w + 2 - 3) / 2 + 1;
  push("stem_pool", h, w, spec.initial_channels);
  for (int b = 0; b < static_cast<int>(spec.block_layers.size()); ++b) {
    const std::string id = std::to_string(b + 1);
    push("dense_block" + id, h, w, spec.block_output_channels(b));
    h /= 2;
    w /= 2;
    push("transition" + id, h, w, spec.transition_output_channels(b));
  }
  push("global_pool", 1, 1, spec.feature_channels());
  push("fully_connected", 1, 1, spec.num_classes);
  return out;
}

}  // namespace histo::dnn
