#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "histo/dnn/train.hpp"
#include "histo/eval/metrics.hpp"
#include "histo/patches/manifest.hpp"

namespace histo {

/// Trains on one index set and predicts another; indices refer to manifest
/// records.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::vector<LabelClass> fit_predict(int fold, std::span<const std::size_t> train,
                                              std::span<const std::size_t> validation) = 0;
};

/// Memorizes training labels by record index and predicts normal otherwise;
/// on disjoint folds it therefore always predicts normal.
class MemorizingLearner final : public Learner {
 public:
  explicit MemorizingLearner(const DatasetManifest& manifest) : manifest_(manifest) {}
  std::vector<LabelClass> fit_predict(int fold, std::span<const std::size_t> train,
                                      std::span<const std::size_t> validation) override;

 private:
  const DatasetManifest& manifest_;
};

/// Trains a fresh network per fold on pre-loaded images (one per record).
/// Normalization statistics are recomputed on each fold's training images.
class DenseNetLearner final : public Learner {
 public:
  DenseNetLearner(dnn::NetworkSpec spec, dnn::TrainOptions options, const dnn::LabeledImages& data,
                  std::uint64_t init_seed);
  std::vector<LabelClass> fit_predict(int fold, std::span<const std::size_t> train,
                                      std::span<const std::size_t> validation) override;

 private:
  dnn::NetworkSpec spec_;
  dnn::TrainOptions options_;
  const dnn::LabeledImages& data_;
  std::uint64_t init_seed_;
};

struct CrossValidationResult {
  SplitAssignment folds;
  std::vector<ConfusionMatrix> per_fold;
  ReportRow row;
};

/// Stratified k folds; each fold is held out once while the learner trains on
/// the rest. Runs folds in order.
CrossValidationResult run_cross_validation(const DatasetManifest& manifest, int k, Learner& learner,
                                           std::uint64_t seed, std::string architecture = "",
                                           std::string pretraining = "");

}  // namespace histo
