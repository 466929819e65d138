#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "devo/cv.hpp"
#include "devo/dataset.hpp"
#include "devo/evolution.hpp"

namespace devo {

struct TrainConfig {
  std::size_t epochs = 500;
  double learning_rate = 0.3;
  double momentum = 0.2;
  double decay = 0.0;  // learning rate at epoch e is lr / (1 + decay * e)
  std::uint64_t seed = 0;
  bool standardize = true;

  void validate() const;
};

/// Per-feature z-score statistics taken from training rows. Empty means identity.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureDataset& data, std::span<const std::size_t> rows);
  bool empty() const { return mean.empty(); }
  void apply(std::span<const double> in, Eigen::Ref<Eigen::VectorXd> out) const;
};

/// Sigmoid hidden layers, softmax output.
struct MlpModel {
  std::vector<int> layer_sizes;  // input, hidden..., classes
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<std::string> class_names;
  Standardizer standardizer;

  static MlpModel zeros(std::vector<int> layer_sizes);
  static MlpModel random(std::vector<int> layer_sizes, std::uint64_t seed, double bound = 0.5);

  std::size_t input_size() const { return static_cast<std::size_t>(layer_sizes.front()); }
  std::size_t output_size() const { return static_cast<std::size_t>(layer_sizes.back()); }
  std::size_t parameter_count() const;
  bool operator==(const MlpModel&) const;
};

struct MlpVelocity {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

struct MlpGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

/// Class probabilities for one raw (unstandardised) feature vector.
Eigen::VectorXd forward(const MlpModel& model, std::span<const double> input);
int predict(const MlpModel& model, std::span<const double> input);

/// Mean cross-entropy -log p(true class) over the dataset rows (all rows when
/// `rows` is empty).
double loss(const MlpModel& model, const FeatureDataset& data, std::span<const std::size_t> rows = {});

/// Gradient of the mean cross-entropy over `rows`.
MlpGradient gradient(const MlpModel& model, const FeatureDataset& data, std::span<const std::size_t> rows);

/// velocity = -lr * grad + momentum * velocity; params += velocity.
/// Throws GradientOverflow on a non-finite gradient.
void backprop_step(MlpModel& model, MlpVelocity& velocity, const FeatureDataset& data,
                   std::span<const std::size_t> rows, double learning_rate, double momentum);

/// Uniform [-0.5, 0.5] initialisation, then per-row momentum SGD over
/// seeded shuffles. `rows` empty means every row.
MlpModel train(const TopologyGenome& genome, const FeatureDataset& data, const TrainConfig& config,
               std::span<const std::size_t> rows = {});

struct CvResult {
  Evaluation pooled;                  // confusion summed over held-out folds
  std::vector<double> fold_accuracy;  // percent per fold
  double mean_accuracy = 0.0;         // mean of fold accuracies
};

/// Stratified k-fold estimate with standardisation fitted on training folds.
/// Rows are processed in canonical order, so the result does not depend on
/// the dataset's row order.
CvResult cross_validate(const TopologyGenome& genome, const FeatureDataset& data, std::size_t folds,
                        const TrainConfig& config, unsigned threads = 1);
double cv_accuracy(const TopologyGenome& genome, const FeatureDataset& data, std::size_t folds,
                   const TrainConfig& config, unsigned threads = 1);

std::string to_json(const MlpModel& model);
MlpModel mlp_from_json(const std::string& text);

}  // namespace devo
