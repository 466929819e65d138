#include "devo/cv.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "devo/error.hpp"
#include "devo/rng.hpp"

namespace devo {

std::vector<int> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  require(folds >= 2, ErrorKind::ConfigError, "cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, rows] : by_class)
    require(rows.size() >= folds, ErrorKind::StratificationError,
            "class " + std::to_string(label) + " has " + std::to_string(rows.size()) + " rows, fewer than " +
                std::to_string(folds) + " folds");

  std::vector<int> fold(labels.size(), -1);
  std::size_t cursor = 0;
  for (auto& [label, rows] : by_class) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    for (std::size_t r : rows) fold[r] = static_cast<int>(cursor++ % folds);
  }
  return fold;
}

std::vector<std::size_t> canonical_order(const FeatureDataset& data) {
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.labels[a] != data.labels[b]) return data.labels[a] < data.labels[b];
    const auto ra = data.row(a), rb = data.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

Evaluation evaluate(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  require(!truth.empty(), ErrorKind::EvalError, "cannot evaluate on an empty test set");
  require(truth.size() == predicted.size(), ErrorKind::EvalError, "prediction count does not match test rows");
  Evaluation ev;
  ev.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < classes && predicted[i] >= 0 &&
                static_cast<std::size_t>(predicted[i]) < classes,
            ErrorKind::EvalError, "label outside the model's class set");
    ++ev.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  ev.total = truth.size();
  ev.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(ev.total);
  return ev;
}

void accumulate(Evaluation& into, const Evaluation& other) {
  if (into.confusion.empty()) into.confusion.assign(other.confusion.size(), std::vector<std::size_t>(other.confusion.size(), 0));
  std::size_t correct = 0;
  into.total = 0;
  for (std::size_t i = 0; i < into.confusion.size(); ++i)
    for (std::size_t j = 0; j < into.confusion.size(); ++j) {
      into.confusion[i][j] += other.confusion[i][j];
      into.total += into.confusion[i][j];
      if (i == j) correct += into.confusion[i][j];
    }
  into.accuracy = into.total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(into.total);
}

}  // namespace devo
