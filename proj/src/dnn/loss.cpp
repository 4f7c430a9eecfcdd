#include "histo/dnn/loss.hpp"

#include <cmath>
#include <string>

#include "histo/error.hpp"

namespace histo::dnn {

ClassWeights class_weights(std::span<const std::uint64_t> counts) {
  require(!counts.empty(), "class weights need counts");
  double n = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      fail(ErrorKind::kData, "class " + std::to_string(c) + " has no samples; its weight is undefined");
    n += static_cast<double>(counts[c]);
  }
  ClassWeights out;
  for (auto c : counts) out.w.push_back(std::log(n / static_cast<double>(c)));
  return out;
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits, int classes) {
  require(classes > 0 && logits.size() % classes == 0, "logits are not a multiple of classes");
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r < logits.size(); r += classes) {
    double mx = logits[r];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, static_cast<double>(logits[r + k]));
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += p[r + k] = std::exp(logits[r + k] - mx);
    for (int k = 0; k < classes; ++k) p[r + k] /= sum;
  }
  return p;
}

template <typename T>
LossResult weighted_cross_entropy(std::span<const T> logits, std::span<const int> labels,
                                  const ClassWeights& weights) {
  const int classes = static_cast<int>(weights.w.size());
  require(classes > 0, "class weights are empty");
  require(logits.size() == labels.size() * classes, "logits and labels disagree in size");
  const std::size_t n = labels.size();
  require(n > 0, "empty batch");
  LossResult out;
  out.dlogits.resize(logits.size());
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && y < classes, "label out of range");
    const T* row = logits.data() + i * classes;
    double mx = row[0];
    for (int k = 1; k < classes; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) sum += std::exp(row[k] - mx);
    const double lse = mx + std::log(sum);
    const double wy = weights.w[y];
    out.loss += wy * (lse - row[y]);
    const double scale = wy / static_cast<double>(n);
    for (int k = 0; k < classes; ++k) {
      const double p = std::exp(row[k] - lse);
      out.dlogits[i * classes + k] = scale * (p - (k == y ? 1.0 : 0.0));
    }
  }
  out.loss /= static_cast<double>(n);
  return out;
}

template <typename T>
int argmax(std::span<const T> row) noexcept {
  int best = 0;
  for (int k = 1; k < static_cast<int>(row.size()); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

template std::vector<double> softmax<float>(std::span<const float>, int);
template std::vector<double> softmax<double>(std::span<const double>, int);
template LossResult weighted_cross_entropy<float>(std::span<const float>, std::span<const int>,
                                                  const ClassWeights&);
template LossResult weighted_cross_entropy<double>(std::span<const double>, std::span<const int>,
                                                   const ClassWeights&);
template int argmax<float>(std::span<const float>) noexcept;
template int argmax<double>(std::span<const double>) noexcept;

}  // namespace histo::dnn
