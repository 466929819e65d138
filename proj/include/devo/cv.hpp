#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "devo/dataset.hpp"

namespace devo {

/// Per-row fold index in [0, folds). Each class is shuffled with a seed
/// derived from `seed` and dealt round-robin, continuing where the previous
/// class stopped, so per-class fold counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

/// Row indices sorted by (label, feature values, original index). Pipelines
/// that stratify and train on this order give results independent of the
/// dataset's row order.
std::vector<std::size_t> canonical_order(const FeatureDataset& data);

struct Evaluation {
  double accuracy = 0.0;                            // percent
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::size_t total = 0;
};

Evaluation evaluate(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

/// Adds `other` into `into` (same class count) and recomputes accuracy.
void accumulate(Evaluation& into, const Evaluation& other);

}  // namespace devo
