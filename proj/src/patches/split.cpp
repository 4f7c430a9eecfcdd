#include "histo/patches/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "histo/error.hpp"
#include "histo/rng.hpp"
#include "histo/text.hpp"

namespace histo {

namespace {

/// Record indices per class; within a class, grouped by tag (sorted) and
/// shuffled inside each group.
std::array<std::vector<std::size_t>, kNumClasses> stratified_order(const DatasetManifest& manifest,
                                                                   std::uint64_t seed) {
  std::array<std::map<std::string, std::vector<std::size_t>>, kNumClasses> strata;
  const auto records = manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i)
    strata[static_cast<std::size_t>(code(records[i].label))][records[i].group].push_back(i);

  std::array<std::vector<std::size_t>, kNumClasses> order;
  for (int c = 0; c < kNumClasses; ++c) {
    for (auto& [group, members] : strata[c]) {
      Rng rng(derive_seed(seed, c, text::fnv1a(group)));
      rng.shuffle(std::span(members));
      order[c].insert(order[c].end(), members.begin(), members.end());
    }
  }
  return order;
}

}  // namespace

SplitAssignment split_stratified(const DatasetManifest& manifest, double train_fraction,
                                 std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  SplitAssignment s;
  s.kind = SplitKind::kTrainVal;
  s.folds = 2;
  s.tags.assign(manifest.size(), kValTag);
  // Evenly spaced selection over the group-ordered list: the class total is
  // round(f * n) and every group's share is within one of f * n_group too.
  for (const auto& members : stratified_order(manifest, seed)) {
    auto target = [&](std::size_t p) {
      return static_cast<std::size_t>(std::floor(static_cast<double>(p) * train_fraction + 0.5));
    };
    for (std::size_t p = 0; p < members.size(); ++p)
      if (target(p + 1) > target(p)) s.tags[members[p]] = kTrainTag;
  }
  return s;
}

SplitAssignment split_by_slide(const DatasetManifest& manifest, double train_fraction,
                               std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  std::map<std::string, std::size_t> per_slide;
  for (const auto& r : manifest.records()) ++per_slide[r.slide_id];
  std::vector<std::string> slides;
  for (const auto& [id, n] : per_slide) slides.push_back(id);
  if (slides.size() < 2)
    fail(ErrorKind::kData, "a slide-level split needs at least two slides");
  Rng rng(derive_seed(seed, 0x51u));
  rng.shuffle(std::span(slides));

  const double goal = train_fraction * static_cast<double>(manifest.size());
  std::map<std::string, int> side;
  double in_train = 0.0;
  bool any_val = false;
  for (std::size_t i = 0; i < slides.size(); ++i) {
    const double n = static_cast<double>(per_slide[slides[i]]);
    bool train;
    if (i == 0)
      train = true;  // at least one training slide
    else if (i + 1 == slides.size() && !any_val)
      train = false;  // and at least one validation slide
    else
      train = std::abs(in_train + n - goal) < std::abs(in_train - goal);
    side[slides[i]] = train ? kTrainTag : kValTag;
    if (train)
      in_train += n;
    else
      any_val = true;
  }
  SplitAssignment s;
  s.kind = SplitKind::kTrainVal;
  s.folds = 2;
  for (const auto& r : manifest.records()) s.tags.push_back(side.at(r.slide_id));
  return s;
}

SplitAssignment kfold_split(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  require(k >= 2, "k-fold split needs k >= 2");
  SplitAssignment s;
  s.kind = SplitKind::kKFold;
  s.folds = k;
  s.tags.assign(manifest.size(), 0);
  std::size_t offset = 0;
  for (const auto& members : stratified_order(manifest, seed)) {
    if (!members.empty() && members.size() < static_cast<std::size_t>(k)) s.underfilled_class = true;
    for (std::size_t p = 0; p < members.size(); ++p)
      s.tags[members[p]] = static_cast<int>((p + offset) % static_cast<std::size_t>(k));
    offset += members.size();
  }
  return s;
}

}  // namespace histo
