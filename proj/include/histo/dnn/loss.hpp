#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace histo::dnn {

/// Per-class loss weights.
struct ClassWeights {
  std::vector<double> w;

  static ClassWeights uniform(int classes) { return {std::vector<double>(classes, 1.0)}; }
  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

/// Log-balanced weights ln(N / N_c). Every count must be positive.
ClassWeights class_weights(std::span<const std::uint64_t> counts);

struct LossResult {
  double loss = 0.0;
  std::vector<double> dlogits;  // N × classes
};

/// loss = (1/N) Σ w[y_i] · −log softmax(logits_i)[y_i], log-sum-exp
/// stabilized. Labels are class codes.
template <typename T>
LossResult weighted_cross_entropy(std::span<const T> logits, std::span<const int> labels,
                                  const ClassWeights& weights);

/// Row-wise softmax.
template <typename T>
std::vector<double> softmax(std::span<const T> logits, int classes);

/// Index of the largest value, lowest index on ties.
template <typename T>
int argmax(std::span<const T> row) noexcept;

}  // namespace histo::dnn
