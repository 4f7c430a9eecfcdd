#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "histo/dnn/spec.hpp"

namespace histo::dnn {

template <typename T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;

  std::size_t size() const noexcept { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct TensorShape {
  std::string name;
  std::vector<std::size_t> shape;
  /// fan_in, fan_out for Xavier init; zero for biases.
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool is_head = false;
};

/// Every tensor a spec needs, in a fixed order. Conv weights are
/// [out][k][k][in]; the FC weight is [classes][features].
std::vector<TensorShape> parameter_shapes(const NetworkSpec& spec);

/// Named parameter tensors in parameter_shapes order.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  /// Zero-filled store shaped for `spec`.
  explicit ParamStore(const NetworkSpec& spec);

  std::span<Tensor<T>> tensors() noexcept { return tensors_; }
  std::span<const Tensor<T>> tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }

  const Tensor<T>& find(const std::string& name) const;
  Tensor<T>& find(const std::string& name);

  std::size_t parameter_count() const noexcept;
  void push_back(Tensor<T> t) { tensors_.push_back(std::move(t)); }
  /// Throws unless names and shapes equal parameter_shapes(spec).
  void check_matches(const NetworkSpec& spec) const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<Tensor<T>> tensors_;
};

/// Index of the first head (fully connected) tensor; head tensors are last.
std::size_t head_tensor_begin(const NetworkSpec& spec);

/// Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases.
template <typename T>
ParamStore<T> init_xavier_uniform(const NetworkSpec& spec, std::uint64_t seed);

template <typename To, typename From>
ParamStore<To> convert_params(const ParamStore<From>& store);

inline constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void save_params(const std::filesystem::path& path, const ParamStore<T>& store);

template <typename T>
struct LoadedParams {
  ParamStore<T> store;
  /// Stored dtype differed from T; values were converted (rounded to nearest
  /// when narrowing).
  bool converted = false;
};

/// Reads a weights file and checks it against `spec`.
template <typename T>
LoadedParams<T> load_params(const std::filesystem::path& path, const NetworkSpec& spec);

}  // namespace histo::dnn
