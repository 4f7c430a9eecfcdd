#include "histo/eval/crossval.hpp"

#include "histo/error.hpp"
#include "histo/patches/split.hpp"
#include "histo/rng.hpp"

namespace histo {

std::vector<LabelClass> MemorizingLearner::fit_predict(int, std::span<const std::size_t> train,
                                                       std::span<const std::size_t> validation) {
  std::vector<std::optional<LabelClass>> memory(manifest_.size());
  for (auto i : train) memory[i] = manifest_.records()[i].label;
  std::vector<LabelClass> out;
  for (auto i : validation) out.push_back(memory[i].value_or(LabelClass::kNormal));
  return out;
}

DenseNetLearner::DenseNetLearner(dnn::NetworkSpec spec, dnn::TrainOptions options,
                                 const dnn::LabeledImages& data, std::uint64_t init_seed)
    : spec_(std::move(spec)), options_(std::move(options)), data_(data), init_seed_(init_seed) {
  data_.validate();
}

std::vector<LabelClass> DenseNetLearner::fit_predict(int fold, std::span<const std::size_t> train,
                                                     std::span<const std::size_t> validation) {
  auto subset = [&](std::span<const std::size_t> idx) {
    dnn::LabeledImages s;
    s.context_margin = data_.context_margin;
    for (auto i : idx) {
      s.images.push_back(data_.images.at(i));
      s.labels.push_back(data_.labels.at(i));
      if (!data_.contexts.empty()) s.contexts.push_back(data_.contexts.at(i));
    }
    return s;
  };
  const auto train_set = subset(train);
  const auto val_set = subset(validation);
  auto options = options_;
  options.stats = compute_dataset_stats(std::span<const RasterImage>(train_set.images));
  options.seed = derive_seed(options_.seed, static_cast<std::uint64_t>(fold));
  auto init = dnn::init_xavier_uniform<float>(spec_, derive_seed(init_seed_, static_cast<std::uint64_t>(fold)));
  const auto result = dnn::train<float>(spec_, std::move(init), train_set, val_set, options);
  std::vector<LabelClass> out;
  for (const auto& p : dnn::predict<float>(spec_, result.best, val_set.images, options.stats))
    out.push_back(p.label);
  return out;
}

CrossValidationResult run_cross_validation(const DatasetManifest& manifest, int k, Learner& learner,
                                           std::uint64_t seed, std::string architecture,
                                           std::string pretraining) {
  CrossValidationResult out;
  out.folds = kfold_split(manifest, k, seed);
  out.row.architecture = std::move(architecture);
  out.row.pretraining = std::move(pretraining);
  out.row.splitting = std::to_string(k) + "-fold cross-validation";
  for (int f = 0; f < k; ++f) {
    const auto val = out.folds.indices_with(f);
    const auto train = out.folds.indices_without(f);
    if (val.empty()) fail(ErrorKind::kData, "fold " + std::to_string(f) + " is empty");
    const auto predicted = learner.fit_predict(f, train, val);
    if (predicted.size() != val.size())
      fail(ErrorKind::kData, "learner returned the wrong number of predictions");
    std::vector<LabelClass> truth;
    for (auto i : val) truth.push_back(manifest.records()[i].label);
    out.per_fold.push_back(confusion(truth, predicted));
    out.row.fold_accuracies.push_back(out.per_fold.back().accuracy());
  }
  out.row.accuracy = mean_accuracy(out.row.fold_accuracies);
  return out;
}

}  // namespace histo
