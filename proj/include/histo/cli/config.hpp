#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "histo/annotations/annotations.hpp"
#include "histo/augment/augment.hpp"
#include "histo/dnn/spec.hpp"
#include "histo/dnn/train.hpp"
#include "histo/patches/extract.hpp"
#include "histo/segmentation/segment.hpp"

namespace histo::cli {

struct SlideEntry {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> annotations;
  /// Overrides whatever resolution the raster carries.
  std::optional<double> resolution_um;
};

struct MaskSettings {
  bool enabled = true;
  /// The mask is computed on the slide downsampled by this factor.
  double downsample = 8.0;
  std::optional<int> threshold;
};

enum class SplitMode { kStratified, kBySlide };
enum class ClassWeighting { kUniform, kLogBalanced };
enum class Dtype { kFloat32, kFloat64 };
enum class BackendKind { kDenseNet, kExternal };

/// Parsed run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
  std::filesystem::path base_dir;
  std::filesystem::path out = "run";
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<SlideEntry> slides;

  ExtractionConfig extract;
  bool random_offset = true;
  MaskSettings mask;

  SplitMode split_mode = SplitMode::kStratified;
  double train_fraction = 0.8;

  AugmentationConfig augmentation;
  dnn::NetworkSpec network = dnn::NetworkSpec::toy();
  dnn::TrainSchedule schedule = dnn::TrainSchedule::fine_tune_slides();
  ClassWeighting class_weighting = ClassWeighting::kLogBalanced;
  Dtype dtype = Dtype::kFloat32;

  int crossval_folds = 5;
  std::string architecture = "DenseNet (toy)";
  std::string pretraining = "none";

  SegmentConfig segment;
  bool segment_use_mask = true;
  BackendKind backend = BackendKind::kDenseNet;
  std::string backend_command;

  PostprocessConfig postprocess;

  std::string report_title = "Classification accuracy";
  std::vector<std::filesystem::path> report_inputs;

  /// FNV-1a of the raw config text.
  std::string config_hash;
};

/// Strict parse: unknown keys anywhere are an error naming the key.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace histo::cli
