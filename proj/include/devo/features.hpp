#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "devo/dataset.hpp"
#include "devo/ingest.hpp"

namespace devo {

enum class FeatureGroup : unsigned {
  Mean,
  Std,
  Moments,
  MinMax,
  Derivatives,
  Distances,
  LogCov,
  Shannon,
  LogEnergy,
  Fft,
};
inline constexpr std::size_t kFeatureGroupCount = 10;

std::string_view to_string(FeatureGroup g) noexcept;
std::optional<FeatureGroup> parse_feature_group(std::string_view name) noexcept;

struct FeatureConfig {
  std::array<bool, kFeatureGroupCount> enabled{};
  std::size_t fft_bins_kept = 50;
  double epsilon = 1e-8;
  unsigned threads = 1;

  static FeatureConfig all();
  static FeatureConfig none();
  bool has(FeatureGroup g) const { return enabled[static_cast<unsigned>(g)]; }
  void set(FeatureGroup g, bool on) { enabled[static_cast<unsigned>(g)] = on; }
  void validate() const;
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population form
  double skewness = 0.0;
  double kurtosis = 0.0;
};

/// Mean, population standard deviation and standardized third/fourth central
/// moments. Zero-variance windows report skewness = kurtosis = 0.
Moments window_moments(std::span<const double> window);

/// Pairs of quarters compared by the distance features, in output order.
inline constexpr std::array<std::array<int, 2>, 6> kQuarterPairs{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct QuarterStats {
  double min = 0.0;
  double max = 0.0;
  std::array<double, 2> half_min{}, half_max{};
  std::array<double, 4> quarter_min{}, quarter_max{}, quarter_mean{};
  // |a - b| over kQuarterPairs for each statistic kind
  std::array<double, 6> dist_min{}, dist_max{}, dist_mean{};
};

/// Window, half-window and quarter-window order statistics plus the pairwise
/// quarter distances. Length must be a positive multiple of four.
QuarterStats quarter_derivatives(std::span<const double> window);

/// Flattens per-channel quarter statistics into the ordered list consumed by
/// log_covariance: quarter values as (kind min,max,mean) x (quarter) x
/// (channel), then distances as (kind) x (pair) x (channel); zero-padded to
/// 150 entries when fewer channels are present.
std::vector<double> quarter_feature_vector(std::span<const QuarterStats> channels);

inline constexpr std::size_t kLogCovInputs = 150;
inline constexpr std::size_t kLogCovDim = 12;
inline constexpr std::size_t kLogCovOutputs = kLogCovDim * (kLogCovDim + 1) / 2;

struct LogCovResult {
  std::vector<double> upper;    // 78 upper-triangular entries, row-major
  std::size_t sanitized = 0;    // non-finite inputs replaced by zero
};

/// Upper triangle of logm(cov(M) + eps I) where M is the first 144 entries
/// reshaped row-major to 12x12, rows taken as observations. The logarithm is
/// computed through a symmetric eigendecomposition.
LogCovResult log_covariance(std::span<const double> quarter_features, double epsilon = 1e-8);

/// Shannon entropy (natural log) of the min-max normalised window scaled to
/// unit mass; a constant window is treated as uniform.
double shannon_entropy(std::span<const double> window);

/// Sum of log(x^2 + eps) over both half-windows. Length must be even.
double log_energy_entropy(std::span<const double> window, double epsilon = 1e-8);

/// Magnitudes of the first bins_kept bins of the N-point DFT.
std::vector<double> fft_features(std::span<const double> window, std::size_t bins_kept);

struct CatalogEntry {
  std::string name;
  FeatureGroup group;
  std::string channel;
  std::size_t index;
};

/// Column layout for a config and channel set. Depends on nothing else.
std::vector<CatalogEntry> feature_catalog(const FeatureConfig& config, std::span<const std::string> channels);
std::string feature_catalog_json(const FeatureConfig& config, std::span<const std::string> channels);

struct ExtractStats {
  std::size_t sanitized = 0;  // non-finite values replaced during extraction
};

/// One row per window. Rows carry the source label and group 0.
FeatureDataset extract(const WindowedSignal& windowed, const FeatureConfig& config, ExtractStats* stats = nullptr);

}  // namespace devo
