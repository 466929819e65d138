#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "devo/dataset.hpp"

namespace devo {

struct DiscretizedAttribute {
  std::vector<double> bin_edges;  // ascending interior thresholds, bins - 1 of them
  std::vector<int> bins;          // per-row bin index
  std::size_t bin_count = 1;
};

/// Equal-width binning over the observed range; a constant column is one bin.
DiscretizedAttribute discretize(std::span<const double> column, std::size_t bins);

/// Bin of x under edges produced by discretize(); values outside the
/// training range fall into the first or last bin.
int bin_of(std::span<const double> edges, double x);

/// Entropy in bits of the class proportions.
double class_entropy(std::span<const int> labels);

/// H(T) - H(T | binned attribute) in bits.
double info_gain(std::span<const int> labels, std::span<const double> column, std::size_t bins);
double info_gain(const FeatureDataset& data, std::size_t column, std::size_t bins);
std::vector<double> info_gain_all(const FeatureDataset& data, std::size_t bins, unsigned threads = 1);

/// One-rule classifier over a single binned attribute, scored by stratified
/// k-fold cross-validation. Returns accuracy in percent.
double one_r(const FeatureDataset& data, std::size_t column, std::size_t bins, std::size_t folds, std::uint64_t seed);

struct AttributeMask {
  std::vector<bool> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  std::vector<std::size_t> selected() const;
  static AttributeMask all(std::size_t n) { return {std::vector<bool>(n, true)}; }
  static AttributeMask none(std::size_t n) { return {std::vector<bool>(n, false)}; }
  bool operator==(const AttributeMask&) const = default;
};

inline constexpr double kUnfit = -std::numeric_limits<double>::infinity();
inline constexpr double kDefaultCardinalityPenalty = 0.01;

/// Mean information gain of the selected columns minus
/// penalty * selected/total. Empty masks score kUnfit.
double subset_fitness(std::span<const double> column_gains, const AttributeMask& mask,
                      double penalty = kDefaultCardinalityPenalty);
double subset_fitness(const FeatureDataset& data, const AttributeMask& mask, std::size_t bins,
                      double penalty = kDefaultCardinalityPenalty);

/// Restricts the dataset to the selected columns. Throws EmptySelection.
FeatureDataset project(const FeatureDataset& data, const AttributeMask& mask);

/// Newline-delimited column names.
void write_mask(const FeatureDataset& data, const AttributeMask& mask, const std::filesystem::path& path);
AttributeMask read_mask(const FeatureDataset& data, const std::filesystem::path& path);

}  // namespace devo
