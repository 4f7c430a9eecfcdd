#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "histo/dnn/params.hpp"
#include "histo/dnn/spec.hpp"
#include "histo/imaging/geometry.hpp"
#include "histo/imaging/label.hpp"
#include "histo/imaging/ops.hpp"
#include "histo/imaging/raster.hpp"

namespace histo {

/// Patches cut around grid centers. `centers_level0` lets backends that know
/// the slide (test oracles) answer without looking at pixels.
struct PatchBatch {
  std::vector<RasterImage> patches;
  std::vector<Point> centers_level0;
};

struct BackendMetadata {
  std::string name;
  double patch_physical_um = 0.0;
  int patch_pixel_px = 0;
  int num_classes = 4;
  /// Normalization the backend applies to raw 8-bit patches, if any.
  std::optional<DatasetStats> stats;
};

/// Maps raw 8-bit patches to per-class probability rows.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual BackendMetadata metadata() const = 0;
  virtual std::vector<std::vector<double>> classify(const PatchBatch& batch) = 0;
};

/// Always answers one class with probability 1.
class ConstantBackend final : public ClassifierBackend {
 public:
  ConstantBackend(LabelClass label, double patch_physical_um, int patch_pixel_px)
      : label_(label), physical_(patch_physical_um), pixels_(patch_pixel_px) {}
  BackendMetadata metadata() const override;
  std::vector<std::vector<double>> classify(const PatchBatch& batch) override;

 private:
  LabelClass label_;
  double physical_;
  int pixels_;
};

/// Trained network; normalizes with the training statistics.
template <typename T>
class DenseNetBackend final : public ClassifierBackend {
 public:
  DenseNetBackend(dnn::NetworkSpec spec, dnn::ParamStore<T> params, DatasetStats stats,
                  double patch_physical_um, int patch_pixel_px);
  BackendMetadata metadata() const override;
  std::vector<std::vector<double>> classify(const PatchBatch& batch) override;

 private:
  dnn::NetworkSpec spec_;
  dnn::ParamStore<T> params_;
  DatasetStats stats_;
  double physical_;
  int pixels_;
};

/// Runs `command <batch_dir>` per batch. The directory holds patch_NNNNN.png
/// files listed in order in batch.txt; the command must write
/// probabilities.txt there with one whitespace-separated row per patch.
class ExternalProcessBackend final : public ClassifierBackend {
 public:
  ExternalProcessBackend(std::string command, BackendMetadata metadata);
  BackendMetadata metadata() const override { return metadata_; }
  std::vector<std::vector<double>> classify(const PatchBatch& batch) override;

 private:
  std::string command_;
  BackendMetadata metadata_;
  int batches_ = 0;
};

}  // namespace histo
