#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace devo {

/// Labeled row-major feature matrix, one row per analysis window.
struct FeatureDataset {
  std::vector<std::string> feature_names;
  std::vector<double> values;  // rows() * cols(), row-major
  std::vector<int> labels;     // index into class_names
  std::vector<std::string> class_names;
  std::vector<int> groups;  // source recording per row; rows of a group are in time order

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return feature_names.size(); }
  std::size_t class_count() const { return class_names.size(); }

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  /// Index of a class label, appending it to class_names when new.
  int intern_class(const std::string& name);
  void add_row(std::span<const double> row, int label, int group);

  /// Rows in the given order; feature names and the class set are kept.
  FeatureDataset subset(std::span<const std::size_t> rows) const;
  std::vector<double> column(std::size_t c) const;

  /// Throws DatasetError on ragged rows, duplicate names or non-finite values.
  void validate() const;
};

/// Loads a feature CSV: header row, exactly one `label` column, numeric cells.
/// Groups are assigned per contiguous run of equal labels.
FeatureDataset load_feature_csv(const std::filesystem::path& path);
/// Writes features in column order followed by the label column.
void write_feature_csv(const FeatureDataset& data, const std::filesystem::path& path);

/// Concatenates datasets with identical feature names, remapping class labels
/// and offsetting group ids so that groups stay distinct.
FeatureDataset concat(std::span<const FeatureDataset> parts);

}  // namespace devo
