#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histo/imaging/label.hpp"

namespace histo {

/// Rows are ground truth, columns predictions.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  /// trace / total; 0 for an empty matrix.
  double accuracy() const noexcept;
  /// Ground-truth count per class.
  std::array<std::uint64_t, kNumClasses> row_sums() const noexcept;
  /// Correct share of each ground-truth class; nullopt for absent classes.
  std::array<std::optional<double>, kNumClasses> recall() const noexcept;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const LabelClass> truth, std::span<const LabelClass> predicted);

/// Aligned text table with class names.
std::string render_confusion(const ConfusionMatrix& m);

/// One experiment: what was trained, on what pre-training, with which split.
struct ReportRow {
  std::string architecture;
  std::string pretraining;
  std::string splitting;
  double accuracy = 0.0;
  /// Per-fold accuracies for cross-validation rows; `accuracy` is their mean.
  std::vector<double> fold_accuracies;

  std::optional<double> best_fold() const noexcept;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Mean of fold accuracies, summed in sorted order so the result does not
/// depend on fold order.
double mean_accuracy(std::span<const double> folds);

struct ExperimentReport {
  std::string title;
  std::vector<ReportRow> rows;

  /// Throws if a cross-validation row's accuracy is not its fold mean.
  void validate() const;
  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

inline constexpr std::string_view kReportHeader = "HISTOPIPE-REPORT v1";

std::string render_report(const ExperimentReport& report);
ExperimentReport parse_report(std::string_view contents);
void save_report(const std::filesystem::path& path, const ExperimentReport& report);
ExperimentReport load_report(const std::filesystem::path& path);

/// Human-readable table laid out like the paper's accuracy tables.
std::string render_table(const ExperimentReport& report);

}  // namespace histo
