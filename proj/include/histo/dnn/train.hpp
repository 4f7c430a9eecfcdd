#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histo/augment/augment.hpp"
#include "histo/dnn/loss.hpp"
#include "histo/dnn/network.hpp"
#include "histo/imaging/label.hpp"
#include "histo/imaging/raster.hpp"

namespace histo::dnn {

enum class PhaseScope { kHeadOnly, kFullNetwork };

std::string_view scope_name(PhaseScope scope) noexcept;

/// lr = base · factor^floor(epoch_in_phase / every)
struct LrDecay {
  double factor = 0.5;
  int every = 20;
};

struct TrainPhase {
  PhaseScope scope = PhaseScope::kFullNetwork;
  int epochs = 1;
  double learning_rate = 1e-3;
};

struct TrainSchedule {
  std::vector<TrainPhase> phases;
  int batch_size = 32;
  bool shuffle_per_epoch = true;
  std::optional<LrDecay> lr_decay;

  void validate() const;
  int total_epochs() const noexcept;
  double learning_rate(std::size_t phase, int epoch_in_phase) const;

  /// Head for 25 epochs at 1e-3, then everything for 250 at 2e-4.
  static TrainSchedule fine_tune_microscopy();
  /// Head for 6 epochs at 5e-3, everything for 60 at 1e-3 and 40 at 5e-4.
  static TrainSchedule fine_tune_slides();
  /// From-scratch pre-training at 1e-3, halved every 20 epochs.
  static TrainSchedule pretraining(int epochs = 100);
};

/// Training or validation images with labels; optional enclosing rasters
/// feed source_context fill.
struct LabeledImages {
  std::vector<RasterImage> images;
  std::vector<LabelClass> labels;
  std::vector<RasterImage> contexts;  // empty, or one per image
  int context_margin = 0;

  std::size_t size() const noexcept { return images.size(); }
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  int phase = 0;
  PhaseScope scope = PhaseScope::kFullNetwork;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct TrainOptions {
  TrainSchedule schedule;
  AugmentationConfig augmentation;
  DatasetStats stats;
  /// Unit weights when absent.
  std::optional<ClassWeights> class_weights;
  std::uint64_t seed = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

template <typename T>
struct TrainResult {
  /// Parameters after the epoch with the highest validation accuracy
  /// (earliest on ties); the final parameters when there is no validation set.
  ParamStore<T> best;
  ParamStore<T> last;
  int best_epoch = -1;
  std::optional<double> best_val_acc;
  std::vector<EpochMetrics> log;
};

/// Plain SGD over the schedule. Each epoch shuffles, drops the final partial
/// batch, augments every sample on its own substream and normalizes with
/// `stats`. train_acc is measured on the un-augmented training set.
template <typename T>
TrainResult<T> train(const NetworkSpec& spec, ParamStore<T> initial, const LabeledImages& train_set,
                     const LabeledImages& val_set, const TrainOptions& options);

struct Prediction {
  LabelClass label = LabelClass::kNormal;
  std::vector<double> probabilities;
};

/// Argmax of softmax, lowest class on ties. Images are normalized with
/// `stats` before the forward pass.
template <typename T>
std::vector<Prediction> predict(const NetworkSpec& spec, const ParamStore<T>& params,
                                std::span<const RasterImage> images, const DatasetStats& stats,
                                int batch_size = 32);

/// Fraction of correct predictions.
template <typename T>
double accuracy(const NetworkSpec& spec, const ParamStore<T>& params, const LabeledImages& set,
                const DatasetStats& stats);

/// Packs normalized images as an N×H×W×C tensor.
template <typename T>
std::vector<T> pack_batch(std::span<const FloatImage> images);

inline constexpr std::string_view kMetricsHeader = "HISTOPIPE-METRICS v1";

std::string render_metrics(std::span<const EpochMetrics> log);
std::vector<EpochMetrics> parse_metrics(std::string_view contents);

}  // namespace histo::dnn
