#include <doctest.h>

#include "histo/error.hpp"
#include "histo/eval/crossval.hpp"
#include "histo/eval/metrics.hpp"
#include "histo/patches/split.hpp"
#include "oracles.hpp"

using namespace histo;

namespace {

DatasetManifest dataset(const ClassCounts& counts) {
  DatasetManifest m;
  int k = 0;
  for (int c = 0; c < kNumClasses; ++c)
    for (std::uint64_t i = 0; i < counts[c]; ++i, ++k)
      m.add({"s", {double(k), 0}, label_from_code(c), 330.0, 157, "p" + std::to_string(k), ""});
  return m;
}

}  // namespace

TEST_CASE("confusion matrix accounting") {
  const std::vector<LabelClass> truth{LabelClass::kNormal, LabelClass::kNormal, LabelClass::kInvasive,
                                      LabelClass::kBenign};
  const std::vector<LabelClass> pred{LabelClass::kNormal, LabelClass::kInvasive, LabelClass::kInvasive,
                                     LabelClass::kBenign};
  const auto cm = confusion(truth, pred);
  CHECK(cm.total() == 4);
  CHECK(cm.trace() == 3);
  CHECK(cm.accuracy() == doctest::Approx(0.75));
  CHECK(*cm.recall()[0] == doctest::Approx(0.5));
  CHECK_FALSE(cm.recall()[2].has_value());
  const auto text = render_confusion(cm);
  CHECK(text.find("75.00%") != std::string::npos);
  CHECK_THROWS_AS(confusion(truth, std::vector<LabelClass>(3)), Error);
}

TEST_CASE("memorizing stub: each fold scores its class-0 fraction; every patch is validated once") {
  const auto m = dataset({30, 9, 4, 12});
  MemorizingLearner learner(m);
  const auto r = run_cross_validation(m, 5, learner, 3, "Lookup", "None");
  CHECK(r.per_fold.size() == 5);
  std::uint64_t seen = 0;
  std::vector<double> expected;
  for (int f = 0; f < 5; ++f) {
    const auto& cm = r.per_fold[f];
    seen += cm.total();
    std::uint64_t n = 0, normal = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (r.folds.tags[i] == f) ++n, normal += m.records()[i].label == LabelClass::kNormal;
    CHECK(cm.total() == n);
    CHECK(cm.accuracy() == doctest::Approx(double(normal) / n));
    expected.push_back(double(normal) / n);
  }
  CHECK(seen == m.size());
  CHECK(r.row.accuracy == doctest::Approx(mean_accuracy(expected)));
  CHECK(r.row.fold_accuracies.size() == 5);
  CHECK(r.folds.underfilled_class);
}

TEST_CASE("report mean is independent of fold order") {
  ReportRow a{"A", "P", "5-fold", 0, {0.9, 0.7, 0.8, 0.65, 0.95}};
  ReportRow b = a;
  std::reverse(b.fold_accuracies.begin(), b.fold_accuracies.end());
  CHECK(mean_accuracy(a.fold_accuracies) == mean_accuracy(b.fold_accuracies));
  CHECK(mean_accuracy(a.fold_accuracies) == doctest::Approx(0.8));
  a.accuracy = mean_accuracy(a.fold_accuracies);
  CHECK(a.best_fold() == doctest::Approx(0.95));
}

TEST_CASE("experiment report round trips and renders a table") {
  ExperimentReport r;
  r.title = "Patch classification";
  r.rows.push_back({"DenseNet-161", "ImageNet", "Random 80/20", 0.94, {}});
  r.rows.push_back({"DenseNet-161", "ImageNet, Camelyon", "5-fold CV", 0, {0.8, 0.7, 0.75, 0.8, 0.7875}});
  r.rows[1].accuracy = mean_accuracy(r.rows[1].fold_accuracies);
  CHECK(parse_report(render_report(r)) == r);
  testing::TempDir dir("report");
  save_report(dir / "r.txt", r);
  CHECK(load_report(dir / "r.txt") == r);
  const auto table = render_table(r);
  CHECK(table.find("94.00%") != std::string::npos);
  CHECK(table.find("76.75%") != std::string::npos);
  CHECK(table.find("Pre-Training") != std::string::npos);
  CHECK_THROWS_AS(parse_report("HISTOPIPE-REPORT v1\nrow=a|b\n"), Error);
  ExperimentReport bad = r;
  bad.rows[0].accuracy = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
