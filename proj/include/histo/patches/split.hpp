#pragma once

#include <cstdint>

#include "histo/patches/manifest.hpp"

namespace histo {

/// Per class (and per group tag when present), shuffles with a seeded RNG and
/// assigns round(train_fraction * n) records to training, so every class's
/// train share is within one sample of the requested fraction.
SplitAssignment split_stratified(const DatasetManifest& manifest, double train_fraction,
                                 std::uint64_t seed);

/// Strict mode: whole slides go to one side, chosen greedily in seeded order
/// to approach train_fraction of all records.
SplitAssignment split_by_slide(const DatasetManifest& manifest, double train_fraction,
                               std::uint64_t seed);

/// Stratified k-fold partition: per-class validation counts differ by at most
/// one across folds. Classes smaller than k set `underfilled_class`.
SplitAssignment kfold_split(const DatasetManifest& manifest, int k, std::uint64_t seed);

}  // namespace histo
