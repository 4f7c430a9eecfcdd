#include "histo/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "histo/error.hpp"
#include "histo/text.hpp"

namespace histo {

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& row : counts)
    for (auto v : row) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t n = 0;
  for (int i = 0; i < kNumClasses; ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

std::array<std::uint64_t, kNumClasses> ConfusionMatrix::row_sums() const noexcept {
  std::array<std::uint64_t, kNumClasses> out{};
  for (int t = 0; t < kNumClasses; ++t)
    for (auto v : counts[t]) out[t] += v;
  return out;
}

std::array<std::optional<double>, kNumClasses> ConfusionMatrix::recall() const noexcept {
  std::array<std::optional<double>, kNumClasses> out;
  const auto rows = row_sums();
  for (int t = 0; t < kNumClasses; ++t)
    if (rows[t] > 0) out[t] = static_cast<double>(counts[t][t]) / static_cast<double>(rows[t]);
  return out;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
  for (int t = 0; t < kNumClasses; ++t)
    for (int p = 0; p < kNumClasses; ++p) counts[t][p] += other.counts[t][p];
  return *this;
}

ConfusionMatrix confusion(std::span<const LabelClass> truth, std::span<const LabelClass> predicted) {
  if (truth.size() != predicted.size())
    fail(ErrorKind::kInvalidArgument, "confusion needs as many predictions as labels");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts[code(truth[i])][code(predicted[i])];
  return m;
}

namespace {

std::string pad(std::string s, std::size_t width, bool right = false) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

std::string render_confusion(const ConfusionMatrix& m) {
  std::size_t w = 9;
  for (const auto& row : m.counts)
    for (auto v : row) w = std::max(w, std::to_string(v).size() + 1);
  std::string out = pad("truth\\pred", 12);
  for (int p = 0; p < kNumClasses; ++p) out += pad(std::string(label_name(label_from_code(p))), w, true);
  out += '\n';
  for (int t = 0; t < kNumClasses; ++t) {
    out += pad(std::string(label_name(label_from_code(t))), 12);
    for (int p = 0; p < kNumClasses; ++p) out += pad(std::to_string(m.counts[t][p]), w, true);
    out += '\n';
  }
  out += "accuracy " + percent(m.accuracy()) + " (" + std::to_string(m.trace()) + "/" +
         std::to_string(m.total()) + ")\n";
  return out;
}

std::optional<double> ReportRow::best_fold() const noexcept {
  if (fold_accuracies.empty()) return std::nullopt;
  return *std::max_element(fold_accuracies.begin(), fold_accuracies.end());
}

double mean_accuracy(std::span<const double> folds) {
  require(!folds.empty(), "mean of zero folds");
  std::vector<double> sorted(folds.begin(), folds.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (double v : sorted) s += v;
  return s / static_cast<double>(sorted.size());
}

void ExperimentReport::validate() const {
  for (const auto& r : rows) {
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      fail(ErrorKind::kData, "report accuracy outside [0, 1]");
    for (double f : r.fold_accuracies)
      if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::kData, "fold accuracy outside [0, 1]");
    if (!r.fold_accuracies.empty() && r.accuracy != mean_accuracy(r.fold_accuracies))
      fail(ErrorKind::kData, "cross-validation row accuracy is not the mean of its folds");
    for (const auto* s : {&r.architecture, &r.pretraining, &r.splitting})
      if (s->find_first_of("|\n") != std::string::npos)
        fail(ErrorKind::kData, "report labels may not contain '|' or newlines");
  }
}

// Record: architecture | pretraining | splitting | accuracy | folds(comma list)
std::string render_report(const ExperimentReport& report) {
  report.validate();
  std::string out(kReportHeader);
  out += "\ntitle=" + report.title + "\n";
  for (const auto& r : report.rows) {
    out += "row=" + r.architecture + "|" + r.pretraining + "|" + r.splitting + "|" +
           text::format_real(r.accuracy) + "|";
    for (std::size_t i = 0; i < r.fold_accuracies.size(); ++i) {
      if (i) out += ',';
      out += text::format_real(r.fold_accuracies[i]);
    }
    out += '\n';
  }
  return out;
}

ExperimentReport parse_report(std::string_view contents) {
  ExperimentReport report;
  bool header = false;
  for (auto raw : text::split(contents, '\n')) {
    const auto line = raw.size() && raw.back() == '\r' ? raw.substr(0, raw.size() - 1) : raw;
    if (text::trim(line).empty()) continue;
    if (!header) {
      if (text::trim(line) != kReportHeader) fail(ErrorKind::kFormat, "not a report file");
      header = true;
      continue;
    }
    if (line.starts_with("title=")) {
      report.title = std::string(line.substr(6));
    } else if (line.starts_with("row=")) {
      const auto f = text::split(line.substr(4), '|');
      if (f.size() != 5) fail(ErrorKind::kFormat, "report row needs 5 fields");
      ReportRow r{std::string(f[0]), std::string(f[1]), std::string(f[2]),
                  text::parse_real(f[3], "accuracy"), {}};
      if (!text::trim(f[4]).empty())
        for (auto v : text::split(f[4], ',')) r.fold_accuracies.push_back(text::parse_real(v, "fold"));
      report.rows.push_back(std::move(r));
    } else {
      fail(ErrorKind::kFormat, "unexpected report line '" + std::string(line) + "'");
    }
  }
  if (!header) fail(ErrorKind::kFormat, "report is empty");
  report.validate();
  return report;
}

void save_report(const std::filesystem::path& path, const ExperimentReport& report) {
  text::write_file(path, render_report(report));
}

ExperimentReport load_report(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kIo, "missing report " + path.string());
  return parse_report(text::read_file(path));
}

std::string render_table(const ExperimentReport& report) {
  report.validate();
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"Architecture", "Pre-Training", "Splitting", "Accuracy", "Best fold"});
  for (const auto& r : report.rows)
    cells.push_back({r.architecture, r.pretraining, r.splitting, percent(r.accuracy),
                     r.best_fold() ? percent(*r.best_fold()) : std::string("-")});
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (int c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  if (!report.title.empty()) out += report.title + "\n";
  auto rule = [&] {
    std::size_t n = 0;
    for (auto w : width) n += w + 3;
    out += std::string(n - 1, '-') + "\n";
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (int c = 0; c < 5; ++c) {
      out += pad(cells[i][c], width[c], c >= 3);
      out += c < 4 ? " | " : "\n";
    }
    if (i == 0) rule();
  }
  return out;
}

}  // namespace histo
