#include "devo/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "devo/cv.hpp"
#include "devo/error.hpp"
#include "devo/parallel.hpp"
#include "text.hpp"

namespace devo {
namespace {

double entropy_of_counts(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

std::size_t label_span(std::span<const int> labels) {
  int max_label = -1;
  for (int l : labels) {
    require(l >= 0, ErrorKind::DatasetError, "negative class label");
    max_label = std::max(max_label, l);
  }
  return static_cast<std::size_t>(max_label + 1);
}

}  // namespace

DiscretizedAttribute discretize(std::span<const double> column, std::size_t bins) {
  require(bins >= 1, ErrorKind::ConfigError, "discretization needs at least one bin");
  DiscretizedAttribute out;
  out.bins.assign(column.size(), 0);
  if (column.empty()) return out;
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  if (*lo == *hi || bins == 1) return out;
  out.bin_count = bins;
  const double width = (*hi - *lo) / static_cast<double>(bins);
  for (std::size_t b = 1; b < bins; ++b) out.bin_edges.push_back(*lo + width * static_cast<double>(b));
  for (std::size_t i = 0; i < column.size(); ++i) out.bins[i] = bin_of(out.bin_edges, column[i]);
  return out;
}

int bin_of(std::span<const double> edges, double x) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

double class_entropy(std::span<const int> labels) {
  require(!labels.empty(), ErrorKind::DatasetError, "class entropy of an empty label list");
  std::vector<std::size_t> counts(label_span(labels), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  return entropy_of_counts(counts, labels.size());
}

double info_gain(std::span<const int> labels, std::span<const double> column, std::size_t bins) {
  require(bins >= 2, ErrorKind::ConfigError, "info gain needs at least 2 bins");
  require(labels.size() == column.size(), ErrorKind::ShapeError, "label and column lengths differ");
  const double h = class_entropy(labels);
  const auto disc = discretize(column, bins);
  const std::size_t k = label_span(labels);
  std::vector<std::size_t> joint(disc.bin_count * k, 0), per_bin(disc.bin_count, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto b = static_cast<std::size_t>(disc.bins[i]);
    ++joint[b * k + static_cast<std::size_t>(labels[i])];
    ++per_bin[b];
  }
  double conditional = 0.0;
  for (std::size_t b = 0; b < disc.bin_count; ++b) {
    if (per_bin[b] == 0) continue;
    const double weight = static_cast<double>(per_bin[b]) / static_cast<double>(labels.size());
    conditional += weight * entropy_of_counts(std::span(joint).subspan(b * k, k), per_bin[b]);
  }
  return std::clamp(h - conditional, 0.0, h);
}

double info_gain(const FeatureDataset& data, std::size_t column, std::size_t bins) {
  require(column < data.cols(), ErrorKind::ShapeError, "column index out of range");
  const auto values = data.column(column);
  return info_gain(data.labels, values, bins);
}

std::vector<double> info_gain_all(const FeatureDataset& data, std::size_t bins, unsigned threads) {
  std::vector<double> out(data.cols());
  parallel_for(data.cols(), threads, [&](std::size_t c) { out[c] = info_gain(data, c, bins); });
  return out;
}

double one_r(const FeatureDataset& data, std::size_t column, std::size_t bins, std::size_t folds, std::uint64_t seed) {
  require(column < data.cols(), ErrorKind::ShapeError, "column index out of range");
  require(data.class_count() >= 2, ErrorKind::DatasetError, "OneR needs at least two classes");
  require(bins >= 1, ErrorKind::ConfigError, "OneR needs at least one bin");
  const auto fold = stratified_folds(data.labels, folds, seed);
  const std::size_t k = data.class_count();

  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> train_values;
    std::vector<int> train_labels;
    for (std::size_t r = 0; r < data.rows(); ++r)
      if (fold[r] != static_cast<int>(f)) {
        train_values.push_back(data.at(r, column));
        train_labels.push_back(data.labels[r]);
      }
    const auto disc = discretize(train_values, bins);
    std::vector<std::size_t> counts(disc.bin_count * k, 0), overall(k, 0);
    for (std::size_t i = 0; i < train_values.size(); ++i) {
      ++counts[static_cast<std::size_t>(disc.bins[i]) * k + static_cast<std::size_t>(train_labels[i])];
      ++overall[static_cast<std::size_t>(train_labels[i])];
    }
    const auto majority = [&](std::span<const std::size_t> c) {
      return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
    };
    const int fallback = majority(overall);
    std::vector<int> rule(disc.bin_count);
    for (std::size_t b = 0; b < disc.bin_count; ++b) {
      const auto c = std::span<const std::size_t>(counts).subspan(b * k, k);
      rule[b] = std::all_of(c.begin(), c.end(), [](std::size_t x) { return x == 0; }) ? fallback : majority(c);
    }
    for (std::size_t r = 0; r < data.rows(); ++r)
      if (fold[r] == static_cast<int>(f) && rule[static_cast<std::size_t>(bin_of(disc.bin_edges, data.at(r, column)))] == data.labels[r])
        ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.rows());
}

std::size_t AttributeMask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }

std::vector<std::size_t> AttributeMask::selected() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out.push_back(i);
  return out;
}

double subset_fitness(std::span<const double> column_gains, const AttributeMask& mask, double penalty) {
  require(mask.size() == column_gains.size(), ErrorKind::ShapeError, "mask length does not match column count");
  const std::size_t chosen = mask.count();
  if (chosen == 0) return kUnfit;
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.bits[i]) sum += column_gains[i];
  return sum / static_cast<double>(chosen) - penalty * static_cast<double>(chosen) / static_cast<double>(mask.size());
}

double subset_fitness(const FeatureDataset& data, const AttributeMask& mask, std::size_t bins, double penalty) {
  require(mask.size() == data.cols(), ErrorKind::ShapeError, "mask length does not match column count");
  std::vector<double> gains(data.cols(), 0.0);
  for (std::size_t c : mask.selected()) gains[c] = info_gain(data, c, bins);
  return subset_fitness(gains, mask, penalty);
}

FeatureDataset project(const FeatureDataset& data, const AttributeMask& mask) {
  require(mask.size() == data.cols(), ErrorKind::ShapeError, "mask length does not match column count");
  const auto cols = mask.selected();
  require(!cols.empty(), ErrorKind::EmptySelection, "attribute mask selects no columns");
  FeatureDataset out;
  out.class_names = data.class_names;
  out.labels = data.labels;
  out.groups = data.groups;
  for (std::size_t c : cols) out.feature_names.push_back(data.feature_names[c]);
  out.values.reserve(data.rows() * cols.size());
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c : cols) out.values.push_back(data.at(r, c));
  return out;
}

void write_mask(const FeatureDataset& data, const AttributeMask& mask, const std::filesystem::path& path) {
  require(mask.size() == data.cols(), ErrorKind::ShapeError, "mask length does not match column count");
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path.string());
  for (std::size_t c : mask.selected()) out << data.feature_names[c] << '\n';
}

AttributeMask read_mask(const FeatureDataset& data, const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < data.cols(); ++c) index[data.feature_names[c]] = c;
  auto mask = AttributeMask::none(data.cols());
  std::string line;
  while (std::getline(in, line)) {
    const auto name = std::string(text::trim(line));
    if (name.empty()) continue;
    const auto it = index.find(name);
    require(it != index.end(), ErrorKind::SchemaError, "mask names unknown column " + name);
    mask.bits[it->second] = true;
  }
  return mask;
}

}  // namespace devo
