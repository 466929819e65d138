#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "devo/cv.hpp"
#include "devo/dataset.hpp"
#include "devo/mlp.hpp"

namespace devo {

enum class Gate : int { Forget = 0, Input = 1, Candidate = 2, Output = 3 };

/// Single-layer LSTM with a softmax readout of the final hidden state. The
/// four gate weight blocks are stacked row-wise in `gate_weights` in Gate
/// order; each block acts on the concatenation [h_{t-1}, x_t].
struct LstmModel {
  std::size_t units = 0;
  std::size_t features = 0;
  Eigen::MatrixXd gate_weights;  // 4*units x (units + features)
  Eigen::VectorXd gate_biases;   // 4*units
  Eigen::MatrixXd readout_weights;  // classes x units
  Eigen::VectorXd readout_biases;
  std::vector<std::string> class_names;
  Standardizer standardizer;

  static LstmModel zeros(std::size_t units, std::size_t features, std::size_t classes);
  /// Xavier-uniform weights, zero biases.
  static LstmModel xavier(std::size_t units, std::size_t features, std::size_t classes, std::uint64_t seed);

  std::size_t class_count() const { return static_cast<std::size_t>(readout_weights.rows()); }
  auto gate_block(Gate g) { return gate_weights.middleRows(static_cast<Eigen::Index>(g) * units_i(), units_i()); }
  auto gate_block(Gate g) const { return gate_weights.middleRows(static_cast<Eigen::Index>(g) * units_i(), units_i()); }
  auto bias_block(Gate g) { return gate_biases.segment(static_cast<Eigen::Index>(g) * units_i(), units_i()); }
  auto bias_block(Gate g) const { return gate_biases.segment(static_cast<Eigen::Index>(g) * units_i(), units_i()); }
  std::size_t parameter_count() const;
  bool operator==(const LstmModel&) const;

 private:
  Eigen::Index units_i() const { return static_cast<Eigen::Index>(units); }
};

struct CellStep {
  Eigen::VectorXd h, c;
  Eigen::VectorXd forget, input, candidate, output;
};

/// One time step on an already-standardised input vector.
CellStep cell_step(const LstmModel& model, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                   const Eigen::VectorXd& x);

/// Class probabilities for a sequence of raw feature vectors (one column per
/// time step), starting from h0 = c0 = 0.
Eigen::VectorXd forward_sequence(const LstmModel& model, const Eigen::MatrixXd& sequence);
int predict(const LstmModel& model, const Eigen::MatrixXd& sequence);

/// Windows grouped into sequences: consecutive rows of one group and label
/// are cut into chunks of `length`; a shorter trailing chunk is kept.
struct SequenceSet {
  std::vector<Eigen::MatrixXd> sequences;  // features x steps, raw values
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> source_rows;
  std::vector<std::string> class_names;
  std::size_t features = 0;

  std::size_t size() const { return sequences.size(); }
};

SequenceSet make_sequences(const FeatureDataset& data, std::size_t length, std::span<const std::size_t> rows = {});

struct LstmTrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 50;
  std::size_t sequence_len = 10;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 5.0;
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LstmGradient {
  Eigen::MatrixXd gate_weights;
  Eigen::VectorXd gate_biases;
  Eigen::MatrixXd readout_weights;
  Eigen::VectorXd readout_biases;

  double norm() const;
  bool finite() const;
};

/// Mean cross-entropy over the chosen sequences (all when empty).
double sequence_loss(const LstmModel& model, const SequenceSet& set, std::span<const std::size_t> which = {});

/// Full backpropagation-through-time gradient of the mean cross-entropy.
LstmGradient bptt_gradient(const LstmModel& model, const SequenceSet& set, std::span<const std::size_t> which);

/// Xavier initialisation then Adam over shuffled mini-batches of sequences;
/// gradients above clip_norm are rescaled, non-finite ones raise
/// GradientOverflow.
LstmModel bptt_train(const SequenceSet& set, std::size_t units, const LstmTrainConfig& config,
                     std::span<const std::size_t> which = {});
LstmModel bptt_train(const FeatureDataset& data, std::size_t units, const LstmTrainConfig& config);

struct LstmCvResult {
  Evaluation pooled;
  std::vector<double> fold_accuracy;
};

/// Stratified k-fold over sequences.
LstmCvResult lstm_cross_validate(const SequenceSet& set, std::size_t units, std::size_t folds,
                                 const LstmTrainConfig& config, unsigned threads = 1);

struct SweepRow {
  std::size_t units = 0;
  double accuracy = 0.0;
  double seconds = 0.0;
};

inline const std::vector<std::size_t> kDefaultUnitSweep{25, 50, 75, 100, 125};

/// One cross-validated accuracy per unit count, all on the same fold split.
std::vector<SweepRow> unit_sweep(const FeatureDataset& data, std::span<const std::size_t> units_list,
                                 const LstmTrainConfig& config, std::size_t folds, unsigned threads = 1);
std::string sweep_csv(std::span<const SweepRow> rows);

std::string to_json(const LstmModel& model);
LstmModel lstm_from_json(const std::string& text);

}  // namespace devo
