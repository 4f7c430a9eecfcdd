#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histo/imaging/geometry.hpp"
#include "histo/imaging/label.hpp"
#include "histo/imaging/ops.hpp"

namespace histo {

struct PatchRecord {
  std::string slide_id;
  Point center;  // level-0 pixels
  LabelClass label = LabelClass::kNormal;
  double physical_um = 0.0;
  int pixel_px = 0;
  std::string path;   // payload, relative to the manifest directory
  std::string group;  // optional stratification tag

  double resolution_um() const noexcept { return physical_um / pixel_px; }
  friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

using ClassCounts = std::array<std::uint64_t, kNumClasses>;

std::uint64_t total(const ClassCounts& counts) noexcept;

enum class SplitKind { kTrainVal, kKFold };

inline constexpr int kTrainTag = 0;
inline constexpr int kValTag = 1;

/// Per-record split tags: kTrainTag/kValTag for kTrainVal, fold index for
/// kKFold.
struct SplitAssignment {
  SplitKind kind = SplitKind::kTrainVal;
  int folds = 2;
  std::vector<int> tags;
  /// Set when some class has fewer members than folds.
  bool underfilled_class = false;

  std::vector<std::size_t> indices_with(int tag) const;
  std::vector<std::size_t> indices_without(int tag) const;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Catalog of an extraction run. Per-class counts are maintained on every
/// mutation and always equal a recount of record labels.
class DatasetManifest {
 public:
  std::span<const PatchRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const ClassCounts& per_class_counts() const noexcept { return counts_; }

  void add(PatchRecord record);
  void append(const DatasetManifest& other);
  void relabel(std::size_t index, LabelClass label);
  void set_path(std::size_t index, std::string path);

  /// Throws unless counts equal a recount and any split covers every record.
  void validate() const;

  std::optional<DatasetStats> stats;
  std::optional<SplitAssignment> split;
  std::uint64_t seed = 0;
  /// Free-form run bookkeeping (downsample, slide list, ...).
  std::map<std::string, std::string> meta;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

 private:
  std::vector<PatchRecord> records_;
  ClassCounts counts_{};
};

ClassCounts recount(std::span<const PatchRecord> records) noexcept;

/// Train/validation class counts of a manifest with a kTrainVal split.
struct SplitCounts {
  ClassCounts train{};
  ClassCounts val{};

  std::uint64_t total() const noexcept;
  ClassCounts combined() const noexcept;
};

SplitCounts count_split(const DatasetManifest& manifest);

inline constexpr std::string_view kManifestHeader = "HISTOPIPE-MANIFEST v1";

std::string render_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view contents);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace histo
