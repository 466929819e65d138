#include "devo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "devo/error.hpp"
#include "text.hpp"

namespace devo {

int FeatureDataset::intern_class(const std::string& name) {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it != class_names.end()) return static_cast<int>(it - class_names.begin());
  class_names.push_back(name);
  return static_cast<int>(class_names.size() - 1);
}

void FeatureDataset::add_row(std::span<const double> row, int label, int group) {
  require(row.size() == cols(), ErrorKind::ShapeError, "row width does not match feature count");
  values.insert(values.end(), row.begin(), row.end());
  labels.push_back(label);
  groups.push_back(group);
}

FeatureDataset FeatureDataset::subset(std::span<const std::size_t> rows_wanted) const {
  FeatureDataset out;
  out.feature_names = feature_names;
  out.class_names = class_names;
  out.values.reserve(rows_wanted.size() * cols());
  for (std::size_t r : rows_wanted) {
    const auto src = row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
    out.labels.push_back(labels[r]);
    out.groups.push_back(groups.empty() ? 0 : groups[r]);
  }
  return out;
}

std::vector<double> FeatureDataset::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
  return out;
}

void FeatureDataset::validate() const {
  require(values.size() == rows() * cols(), ErrorKind::DatasetError, "value count is not rows x columns");
  require(groups.size() == rows(), ErrorKind::DatasetError, "group count does not match rows");
  std::unordered_set<std::string> seen;
  for (const auto& name : feature_names)
    require(seen.insert(name).second, ErrorKind::DatasetError, "duplicate feature name " + name);
  for (int label : labels)
    require(label >= 0 && static_cast<std::size_t>(label) < class_names.size(), ErrorKind::DatasetError,
            "label index out of range");
  for (double v : values) require(std::isfinite(v), ErrorKind::DatasetError, "dataset contains NaN or Inf");
}

FeatureDataset load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::SchemaError, "feature CSV has no header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  std::vector<std::string> header;
  for (auto cell : text::split(text::trim(line), ',')) header.emplace_back(text::trim(cell));
  std::size_t label_col = header.size();
  FeatureDataset data;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = text::trim(header[i]);
    // the public mental-state export capitalises the label column
    if (name == "label" || name == "Label") {
      require(label_col == header.size(), ErrorKind::SchemaError, "more than one label column");
      label_col = i;
    } else {
      data.feature_names.emplace_back(name);
    }
  }
  require(label_col < header.size(), ErrorKind::SchemaError, "feature CSV has no label column");

  std::size_t row_no = 1;
  std::vector<double> row(data.cols());
  int group = -1;
  int prev_label = -1;
  while (std::getline(in, line)) {
    ++row_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    require(cells.size() == header.size(), ErrorKind::ParseError,
            "line " + std::to_string(row_no) + " has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(header.size()));
    std::size_t k = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == label_col) continue;
      const auto v = text::parse_double(cells[i]);
      require(v.has_value(), ErrorKind::ParseError,
              "non-numeric cell at line " + std::to_string(row_no) + ", column " + std::to_string(i + 1) + " (" +
                  header[i] + ")");
      row[k++] = *v;
    }
    const int label = data.intern_class(std::string(text::trim(cells[label_col])));
    if (label != prev_label) ++group;
    prev_label = label;
    data.add_row(row, label, group);
  }
  return data;
}

void write_feature_csv(const FeatureDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& name : data.feature_names) out << name << ',';
  out << "label\n";
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (double v : data.row(r)) out << text::format_double(v) << ',';
    out << data.class_names[static_cast<std::size_t>(data.labels[r])] << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::IoError, "failed writing " + path.string());
}

FeatureDataset concat(std::span<const FeatureDataset> parts) {
  FeatureDataset out;
  if (parts.empty()) return out;
  out.feature_names = parts.front().feature_names;
  int group_offset = 0;
  for (const auto& part : parts) {
    require(part.feature_names == out.feature_names, ErrorKind::SchemaError, "cannot concatenate differing feature sets");
    int max_group = -1;
    for (std::size_t r = 0; r < part.rows(); ++r) {
      const int label = out.intern_class(part.class_names[static_cast<std::size_t>(part.labels[r])]);
      const int g = part.groups.empty() ? 0 : part.groups[r];
      out.add_row(part.row(r), label, g + group_offset);
      max_group = std::max(max_group, g);
    }
    group_offset += max_group + 1;
  }
  return out;
}

}  // namespace devo
