#include "devo/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "devo/error.hpp"
#include "devo/fft.hpp"
#include "devo/parallel.hpp"

namespace devo {
namespace {

constexpr std::array<std::string_view, kFeatureGroupCount> kGroupNames = {
    "mean", "std", "moments", "minmax", "derivatives", "distances", "logcov", "shannon", "logenergy", "fft"};

constexpr std::array<std::string_view, kFeatureGroupCount> kGroupDescriptions = {
    "window mean",
    "window population standard deviation",
    "skewness (0) and kurtosis (1) from third/fourth central moments",
    "window min, max, then first-half min, max, second-half min, max",
    "quarter-window min x4, max x4, mean x4",
    "|a-b| between quarter statistics over the six quarter pairs for min, max, mean",
    "upper triangle of the matrix logarithm of the 12x12 quarter-feature covariance",
    "Shannon entropy of the normalised window (natural log)",
    "log-energy entropy summed over both half-windows",
    "DFT magnitude of bin k",
};

// Exact for constant spans, so constant windows give exactly-zero distances.
double span_mean(std::span<const double> xs) {
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) return *lo;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

std::size_t group_width(FeatureGroup g, const FeatureConfig& config) {
  switch (g) {
    case FeatureGroup::Mean:
    case FeatureGroup::Std:
    case FeatureGroup::Shannon:
    case FeatureGroup::LogEnergy:
      return 1;
    case FeatureGroup::Moments:
      return 2;
    case FeatureGroup::MinMax:
      return 6;
    case FeatureGroup::Derivatives:
      return 12;
    case FeatureGroup::Distances:
      return 18;
    case FeatureGroup::LogCov:
      return kLogCovOutputs;
    case FeatureGroup::Fft:
      return config.fft_bins_kept;
  }
  return 0;
}

double sanitize(double v, std::size_t& count) {
  if (std::isfinite(v)) return v;
  ++count;
  return 0.0;
}

}  // namespace

std::string_view to_string(FeatureGroup g) noexcept { return kGroupNames[static_cast<unsigned>(g)]; }

std::optional<FeatureGroup> parse_feature_group(std::string_view name) noexcept {
  for (unsigned i = 0; i < kFeatureGroupCount; ++i)
    if (kGroupNames[i] == name) return static_cast<FeatureGroup>(i);
  return std::nullopt;
}

FeatureConfig FeatureConfig::all() {
  FeatureConfig c;
  c.enabled.fill(true);
  return c;
}

FeatureConfig FeatureConfig::none() { return FeatureConfig{}; }

void FeatureConfig::validate() const {
  require(fft_bins_kept >= 1, ErrorKind::ConfigError, "fft_bins_kept must be at least 1");
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::ConfigError, "epsilon must be positive");
}

Moments window_moments(std::span<const double> window) {
  require(!window.empty(), ErrorKind::ShapeError, "window_moments needs a non-empty window");
  Moments m;
  m.mean = span_mean(window);
  const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
  if (*lo == *hi) return m;

  const double n = static_cast<double>(window.size());
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : window) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.stddev = std::sqrt(m2);
  if (m2 > 0.0) {
    m.skewness = m3 / (m2 * m.stddev);
    m.kurtosis = m4 / (m2 * m2);
  }
  return m;
}

QuarterStats quarter_derivatives(std::span<const double> window) {
  require(!window.empty() && window.size() % 4 == 0, ErrorKind::ShapeError,
          "quarter statistics need a window length divisible by 4, got " + std::to_string(window.size()));
  QuarterStats q;
  const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
  q.min = *lo;
  q.max = *hi;
  const std::size_t half = window.size() / 2;
  for (std::size_t h = 0; h < 2; ++h) {
    const auto part = window.subspan(h * half, half);
    const auto [a, b] = std::minmax_element(part.begin(), part.end());
    q.half_min[h] = *a;
    q.half_max[h] = *b;
  }
  const std::size_t quarter = window.size() / 4;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto part = window.subspan(k * quarter, quarter);
    const auto [a, b] = std::minmax_element(part.begin(), part.end());
    q.quarter_min[k] = *a;
    q.quarter_max[k] = *b;
    q.quarter_mean[k] = span_mean(part);
  }
  for (std::size_t p = 0; p < kQuarterPairs.size(); ++p) {
    const auto [i, j] = kQuarterPairs[p];
    q.dist_min[p] = std::abs(q.quarter_min[i] - q.quarter_min[j]);
    q.dist_max[p] = std::abs(q.quarter_max[i] - q.quarter_max[j]);
    q.dist_mean[p] = std::abs(q.quarter_mean[i] - q.quarter_mean[j]);
  }
  return q;
}

std::vector<double> quarter_feature_vector(std::span<const QuarterStats> channels) {
  std::vector<double> out;
  out.reserve(std::max<std::size_t>(kLogCovInputs, 30 * channels.size()));
  using Quarter = std::array<double, 4> QuarterStats::*;
  using Pair = std::array<double, 6> QuarterStats::*;
  for (Quarter kind : {&QuarterStats::quarter_min, &QuarterStats::quarter_max, &QuarterStats::quarter_mean})
    for (std::size_t k = 0; k < 4; ++k)
      for (const auto& ch : channels) out.push_back((ch.*kind)[k]);
  for (Pair kind : {&QuarterStats::dist_min, &QuarterStats::dist_max, &QuarterStats::dist_mean})
    for (std::size_t p = 0; p < 6; ++p)
      for (const auto& ch : channels) out.push_back((ch.*kind)[p]);
  if (out.size() < kLogCovInputs) out.resize(kLogCovInputs, 0.0);
  return out;
}

LogCovResult log_covariance(std::span<const double> quarter_features, double epsilon) {
  require(quarter_features.size() >= kLogCovInputs, ErrorKind::ShapeError,
          "log_covariance needs at least 150 quarter features, got " + std::to_string(quarter_features.size()));
  require(epsilon > 0.0, ErrorKind::ConfigError, "log_covariance epsilon must be positive");

  LogCovResult result;
  constexpr auto n = static_cast<Eigen::Index>(kLogCovDim);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      m(r, c) = sanitize(quarter_features[static_cast<std::size_t>(r * n + c)], result.sanitized);

  const Eigen::RowVectorXd mu = m.colwise().mean();
  const Eigen::MatrixXd centered = m.rowwise() - mu;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  cov.diagonal().array() += epsilon;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // cov + eps*I is positive definite; clamp guards rounding below eps
  const Eigen::VectorXd log_lambda = eig.eigenvalues().cwiseMax(epsilon).array().log().matrix();
  const Eigen::MatrixXd logm = eig.eigenvectors() * log_lambda.asDiagonal() * eig.eigenvectors().transpose();

  result.upper.reserve(kLogCovOutputs);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = r; c < n; ++c) result.upper.push_back(logm(r, c));
  return result;
}

double shannon_entropy(std::span<const double> window) {
  require(!window.empty(), ErrorKind::ShapeError, "shannon_entropy needs a non-empty window");
  const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
  const double n = static_cast<double>(window.size());
  if (*lo == *hi) return std::log(n);
  const double range = *hi - *lo;
  double total = 0.0;
  for (double x : window) total += (x - *lo) / range;
  double h = 0.0;
  for (double x : window) {
    const double p = ((x - *lo) / range) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double log_energy_entropy(std::span<const double> window, double epsilon) {
  require(!window.empty() && window.size() % 2 == 0, ErrorKind::ShapeError,
          "log-energy entropy needs an even window length");
  const std::size_t half = window.size() / 2;
  double first = 0.0, second = 0.0;
  for (std::size_t i = 0; i < half; ++i) first += std::log(window[i] * window[i] + epsilon);
  for (std::size_t i = half; i < window.size(); ++i) second += std::log(window[i] * window[i] + epsilon);
  return first + second;
}

std::vector<double> fft_features(std::span<const double> window, std::size_t bins_kept) {
  require(!window.empty(), ErrorKind::ShapeError, "fft_features needs a non-empty window");
  require(bins_kept >= 1 && bins_kept <= window.size() / 2 + 1, ErrorKind::ConfigError,
          "bins_kept must lie in [1, N/2+1] for N=" + std::to_string(window.size()));
  const auto spectrum = fft::transform_real(window);
  std::vector<double> out(bins_kept);
  for (std::size_t k = 0; k < bins_kept; ++k) out[k] = std::abs(spectrum[k]);
  return out;
}

std::vector<CatalogEntry> feature_catalog(const FeatureConfig& config, std::span<const std::string> channels) {
  std::vector<CatalogEntry> out;
  for (unsigned g = 0; g < kFeatureGroupCount; ++g) {
    const auto group = static_cast<FeatureGroup>(g);
    if (!config.has(group)) continue;
    const std::size_t width = group_width(group, config);
    auto add = [&](const std::string& channel) {
      for (std::size_t i = 0; i < width; ++i)
        out.push_back({std::string(to_string(group)) + "." + channel + "." + std::to_string(i), group, channel, i});
    };
    if (group == FeatureGroup::LogCov) {
      add("all");
    } else {
      for (const auto& ch : channels) add(ch);
    }
  }
  return out;
}

std::string feature_catalog_json(const FeatureConfig& config, std::span<const std::string> channels) {
  nlohmann::json doc;
  doc["format"] = "devo-feature-catalog";
  doc["version"] = 1;
  doc["fft_bins_kept"] = config.fft_bins_kept;
  doc["epsilon"] = config.epsilon;
  doc["channels"] = std::vector<std::string>(channels.begin(), channels.end());
  nlohmann::json groups = nlohmann::json::array();
  for (unsigned g = 0; g < kFeatureGroupCount; ++g)
    if (config.enabled[g])
      groups.push_back({{"group", kGroupNames[g]}, {"description", kGroupDescriptions[g]}});
  doc["groups"] = groups;
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& e : feature_catalog(config, channels))
    columns.push_back({{"name", e.name}, {"group", to_string(e.group)}, {"channel", e.channel}, {"index", e.index}});
  doc["columns"] = columns;
  doc["count"] = columns.size();
  return doc.dump(2);
}

FeatureDataset extract(const WindowedSignal& windowed, const FeatureConfig& config, ExtractStats* stats) {
  config.validate();
  require(windowed.source != nullptr, ErrorKind::ShapeError, "windowed signal has no source");
  const std::size_t channels = windowed.channel_count();
  const std::size_t n = windowed.window_samples;
  if (config.has(FeatureGroup::MinMax) || config.has(FeatureGroup::Derivatives) ||
      config.has(FeatureGroup::Distances) || config.has(FeatureGroup::LogCov))
    require(n % 4 == 0, ErrorKind::ShapeError, "window length must be divisible by 4 for quarter statistics");
  if (config.has(FeatureGroup::LogEnergy))
    require(n % 2 == 0, ErrorKind::ShapeError, "window length must be even for log-energy entropy");
  if (config.has(FeatureGroup::Fft))
    require(config.fft_bins_kept <= n / 2 + 1, ErrorKind::ConfigError,
            "fft_bins_kept exceeds N/2+1 for window of " + std::to_string(n) + " samples");

  const auto catalog = feature_catalog(config, windowed.source->channel_names);
  const std::size_t width = catalog.size();
  const std::size_t count = windowed.windows.size();
  std::vector<double> values(count * width);
  std::vector<std::size_t> sanitized(count, 0);

  parallel_for(count, config.threads, [&](std::size_t w) {
    std::vector<Moments> moments(channels);
    std::vector<QuarterStats> quarters(channels);
    const bool need_moments = config.has(FeatureGroup::Mean) || config.has(FeatureGroup::Std) ||
                              config.has(FeatureGroup::Moments);
    const bool need_quarters = config.has(FeatureGroup::MinMax) || config.has(FeatureGroup::Derivatives) ||
                               config.has(FeatureGroup::Distances) || config.has(FeatureGroup::LogCov);
    for (std::size_t c = 0; c < channels; ++c) {
      if (need_moments) moments[c] = window_moments(windowed.slice(w, c));
      if (need_quarters) quarters[c] = quarter_derivatives(windowed.slice(w, c));
    }

    double* out = values.data() + w * width;
    std::size_t& bad = sanitized[w];
    auto put = [&](double v) { *out++ = sanitize(v, bad); };
    for (unsigned g = 0; g < kFeatureGroupCount; ++g) {
      const auto group = static_cast<FeatureGroup>(g);
      if (!config.has(group)) continue;
      if (group == FeatureGroup::LogCov) {
        const auto lc = log_covariance(quarter_feature_vector(quarters), config.epsilon);
        bad += lc.sanitized;
        for (double v : lc.upper) put(v);
        continue;
      }
      for (std::size_t c = 0; c < channels; ++c) {
        const auto& q = quarters[c];
        switch (group) {
          case FeatureGroup::Mean: put(moments[c].mean); break;
          case FeatureGroup::Std: put(moments[c].stddev); break;
          case FeatureGroup::Moments:
            put(moments[c].skewness);
            put(moments[c].kurtosis);
            break;
          case FeatureGroup::MinMax:
            for (double v : {q.min, q.max, q.half_min[0], q.half_max[0], q.half_min[1], q.half_max[1]}) put(v);
            break;
          case FeatureGroup::Derivatives:
            for (double v : q.quarter_min) put(v);
            for (double v : q.quarter_max) put(v);
            for (double v : q.quarter_mean) put(v);
            break;
          case FeatureGroup::Distances:
            for (double v : q.dist_min) put(v);
            for (double v : q.dist_max) put(v);
            for (double v : q.dist_mean) put(v);
            break;
          case FeatureGroup::Shannon: put(shannon_entropy(windowed.slice(w, c))); break;
          case FeatureGroup::LogEnergy: put(log_energy_entropy(windowed.slice(w, c), config.epsilon)); break;
          case FeatureGroup::Fft:
            for (double v : fft_features(windowed.slice(w, c), config.fft_bins_kept)) put(v);
            break;
          case FeatureGroup::LogCov: break;
        }
      }
    }
  });

  FeatureDataset data;
  data.feature_names.reserve(width);
  for (const auto& e : catalog) data.feature_names.push_back(e.name);
  data.values = std::move(values);
  const int label = data.intern_class(windowed.source->label.value_or(""));
  data.labels.assign(count, label);
  data.groups.assign(count, 0);
  if (stats != nullptr) {
    stats->sanitized = 0;
    for (std::size_t s : sanitized) stats->sanitized += s;
  }
  return data;
}

}  // namespace devo
