#include <doctest.h>

#include <cmath>
#include <numeric>

#include "devo/lstm.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace devo;

namespace {

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

LstmModel random_model(std::size_t units, std::size_t features, std::size_t classes, std::uint64_t seed,
                       double scale = 1.0) {
  auto m = LstmModel::zeros(units, features, classes);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Eigen::Index i = 0; i < m.gate_weights.size(); ++i) m.gate_weights.data()[i] = u(gen);
  for (Eigen::Index i = 0; i < m.gate_biases.size(); ++i) m.gate_biases(i) = u(gen);
  for (Eigen::Index i = 0; i < m.readout_weights.size(); ++i) m.readout_weights.data()[i] = u(gen);
  for (Eigen::Index i = 0; i < m.readout_biases.size(); ++i) m.readout_biases(i) = u(gen);
  return m;
}

SequenceSet random_set(std::size_t count, std::size_t features, std::size_t steps, std::size_t classes,
                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  SequenceSet s;
  s.features = features;
  for (std::size_t k = 0; k < classes; ++k) s.class_names.push_back("c" + std::to_string(k));
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::MatrixXd seq(features, steps);
    for (Eigen::Index j = 0; j < seq.size(); ++j) seq.data()[j] = n(gen);
    s.sequences.push_back(seq);
    s.labels.push_back(static_cast<int>(i % classes));
    s.source_rows.push_back({i});
  }
  return s;
}

// Recordings whose class shows only in how feature 0 moves over time.
FeatureDataset temporal_dataset(std::size_t recordings, std::size_t rows_each, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  FeatureDataset d;
  d.feature_names = {"a", "b"};
  d.class_names = {"rise", "fall"};
  for (std::size_t g = 0; g < recordings; ++g) {
    const int label = static_cast<int>(g % 2);
    for (std::size_t t = 0; t < rows_each; ++t) {
      const double phase = static_cast<double>(t % 10) / 10.0;
      const double a = (label == 0 ? phase : 1.0 - phase) + noise(gen);
      d.add_row(std::vector<double>{a, noise(gen)}, label, static_cast<int>(g));
    }
  }
  return d;
}

template <typename Fn>
void perturb_all(LstmModel& m, Fn&& fn) {
  for (auto* block : {&m.gate_weights, &m.readout_weights})
    for (Eigen::Index i = 0; i < block->size(); ++i) fn(block->data()[i], [&] { return i; }, block == &m.gate_weights ? 0 : 2);
  for (auto* block : {&m.gate_biases, &m.readout_biases})
    for (Eigen::Index i = 0; i < block->size(); ++i) fn(block->data()[i], [&] { return i; }, block == &m.gate_biases ? 1 : 3);
}

double check_bptt(const LstmModel& model, const SequenceSet& set) {
  std::vector<std::size_t> all(set.size());
  std::iota(all.begin(), all.end(), 0);
  const auto g = bptt_gradient(model, set, all);
  const double* analytic[4] = {g.gate_weights.data(), g.gate_biases.data(), g.readout_weights.data(),
                               g.readout_biases.data()};
  const double h = 1e-6;
  double worst = 0.0;
  auto probe = model;
  perturb_all(probe, [&](double& p, auto index, int block) {
    const double saved = p;
    p = saved + h;
    const double up = sequence_loss(probe, set);
    p = saved - h;
    const double down = sequence_loss(probe, set);
    p = saved;
    worst = std::max(worst, oracle::relative_error(analytic[block][index()], (up - down) / (2 * h)));
  });
  return worst;
}

}  // namespace

TEST_CASE("zero parameters give half-open gates and a uniform readout") {
  const auto m = LstmModel::zeros(4, 3, 5);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 2.0);
  const auto s = cell_step(m, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), x);
  for (Eigen::Index u = 0; u < 4; ++u) {
    CHECK(s.forget(u) == 0.5);
    CHECK(s.input(u) == 0.5);
    CHECK(s.candidate(u) == 0.0);
    CHECK(s.c(u) == 0.0);
    CHECK(s.h(u) == 0.0);
  }
  const auto p = forward_sequence(m, Eigen::MatrixXd::Random(3, 6));
  for (Eigen::Index k = 0; k < 5; ++k) CHECK(p(k) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(m.parameter_count() == 4 * 4 * 7 + 16 + 5 * 4 + 5);
}

TEST_CASE("saturated gates carry the cell forward") {
  auto m = LstmModel::zeros(2, 1, 2);
  m.gate_biases.setConstant(50.0);
  const Eigen::VectorXd c_prev = Eigen::VectorXd::Constant(2, 0.5);
  const auto s = cell_step(m, Eigen::VectorXd::Zero(2), c_prev, Eigen::VectorXd::Zero(1));
  for (Eigen::Index u = 0; u < 2; ++u) {
    CHECK(s.c(u) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(s.h(u) == doctest::Approx(std::tanh(1.5)).epsilon(1e-12));
  }
  m.bias_block(Gate::Forget).setConstant(-50.0);
  const auto r = cell_step(m, Eigen::VectorXd::Zero(2), c_prev, Eigen::VectorXd::Zero(1));
  CHECK(r.c(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cell step agrees with a scalar oracle") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t units = 1 + trial % 5, features = 1 + trial % 4;
    const auto m = random_model(units, features, 3, trial, 2.0);
    const Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(random_vector(units, gen).data(), units);
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(random_vector(units, gen, -3, 3).data(), units);
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(random_vector(features, gen, -4, 4).data(), features);
    const auto got = cell_step(m, h, c, x);
    const auto ref = oracle::lstm_step(rows_of(m.gate_weights), vec(m.gate_biases), vec(h), vec(c), vec(x));
    for (std::size_t u = 0; u < units; ++u) {
      CHECK(std::abs(got.forget(u) - ref.f[u]) < 1e-10);
      CHECK(std::abs(got.input(u) - ref.i[u]) < 1e-10);
      CHECK(std::abs(got.candidate(u) - ref.g[u]) < 1e-10);
      CHECK(std::abs(got.output(u) - ref.o[u]) < 1e-10);
      CHECK(std::abs(got.c(u) - ref.c[u]) < 1e-10);
      CHECK(std::abs(got.h(u) - ref.h[u]) < 1e-10);
    }
  }
}

TEST_CASE("gates stay in (0,1) and hidden state in [-1,1]") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(4, 3, 2, 1000 + trial, 5.0);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(4), c = Eigen::VectorXd::Zero(4);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(random_vector(3, gen, -10, 10).data(), 3);
      const auto s = cell_step(m, h, c, x);
      for (const auto* gate : {&s.forget, &s.input, &s.output}) {
        CHECK(gate->minCoeff() >= 0.0);
        CHECK(gate->maxCoeff() <= 1.0);
      }
      CHECK(s.candidate.cwiseAbs().maxCoeff() <= 1.0);
      CHECK(s.h.cwiseAbs().maxCoeff() <= 1.0);
      h = s.h;
      c = s.c;
    }
  }
}

TEST_CASE("length-one sequences and order sensitivity") {
  const auto m = random_model(3, 2, 2, 7, 1.5);
  Eigen::MatrixXd one(2, 1);
  one << 0.3, -0.8;
  const auto s = cell_step(m, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3), one.col(0));
  Eigen::VectorXd z = m.readout_weights * s.h + m.readout_biases;
  z = (z.array() - z.maxCoeff()).exp();
  z /= z.sum();
  CHECK((forward_sequence(m, one) - z).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::MatrixXd seq(2, 5);
  seq << 1, 2, 3, 4, 5, -1, 0, 1, 0, -1;
  const Eigen::MatrixXd reversed = seq.rowwise().reverse();
  CHECK((forward_sequence(m, seq) - forward_sequence(m, reversed)).cwiseAbs().maxCoeff() > 1e-6);
  CHECK_THROWS_KIND(forward_sequence(m, Eigen::MatrixXd(2, 0)), ErrorKind::EmptySequence);
}

TEST_CASE("BPTT gradient matches central differences on a 3-unit 4-step model") {
  const auto set = random_set(6, 2, 4, 3, 1);
  CHECK(check_bptt(random_model(3, 2, 3, 11, 0.8), set) < 1e-4);
}

TEST_CASE("BPTT gradient matches central differences over 20 configurations") {
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t units = 1 + trial % 4, features = 1 + trial % 3, steps = 1 + trial % 6, classes = 2 + trial % 3;
    const auto set = random_set(4 + trial % 3, features, steps, classes, 50 + trial);
    auto m = random_model(units, features, classes, 200 + trial, 0.8);
    if (trial % 2) {
      m.standardizer.mean.assign(features, 0.25);
      m.standardizer.scale.assign(features, 1.5);
    }
    CHECK_MESSAGE(check_bptt(m, set) < 1e-4, "trial " << trial);
  }
}

TEST_CASE("make_sequences splits on group and label and keeps short tails") {
  FeatureDataset d;
  d.feature_names = {"v"};
  d.class_names = {"a", "b"};
  for (int i = 0; i < 7; ++i) d.add_row(std::vector<double>{double(i)}, 0, 0);
  for (int i = 0; i < 3; ++i) d.add_row(std::vector<double>{double(10 + i)}, 1, 0);
  for (int i = 0; i < 2; ++i) d.add_row(std::vector<double>{double(20 + i)}, 1, 1);
  const auto s = make_sequences(d, 3);
  REQUIRE(s.size() == 5);
  CHECK(s.sequences[0].cols() == 3);
  CHECK(s.sequences[2].cols() == 1);
  CHECK(s.sequences[2](0, 0) == 6.0);
  CHECK(s.labels == std::vector<int>{0, 0, 0, 1, 1});
  CHECK(s.source_rows[4] == std::vector<std::size_t>{10, 11});
  std::size_t total = 0;
  for (const auto& rows : s.source_rows) total += rows.size();
  CHECK(total == d.rows());
}

TEST_CASE("training learns a temporal pattern") {
  const auto d = temporal_dataset(40, 20, 3);
  LstmTrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 10;
  cfg.sequence_len = 10;
  cfg.seed = 5;
  const auto set = make_sequences(d, cfg.sequence_len);
  const auto m = bptt_train(set, 8, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) correct += predict(m, set.sequences[i]) == set.labels[i];
  CHECK(100.0 * correct / set.size() >= 90.0);
}

TEST_CASE("zero epochs return the initial model and training is deterministic") {
  const auto set = random_set(10, 3, 4, 2, 9);
  LstmTrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 4;
  const auto init = bptt_train(set, 5, cfg);
  CHECK(init.gate_biases.isZero());
  CHECK(init.readout_biases.isZero());
  const double bound = std::sqrt(6.0 / (5 + 3 + 5));
  CHECK(init.gate_weights.cwiseAbs().maxCoeff() <= bound);
  cfg.epochs = 3;
  const auto a = bptt_train(set, 5, cfg), b = bptt_train(set, 5, cfg);
  CHECK(a == b);
  CHECK_FALSE(a == init);
}

TEST_CASE("cross-validation and sweep rows") {
  const auto d = temporal_dataset(20, 20, 8);
  LstmTrainConfig cfg;
  cfg.epochs = 5;
  cfg.sequence_len = 10;
  cfg.seed = 2;
  const std::vector<std::size_t> units{2, 4};
  const auto rows = unit_sweep(d, units, cfg, 4, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].units == 2);
  CHECK(rows[1].units == 4);
  for (const auto& r : rows) {
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 100.0);
  }
  const auto csv = sweep_csv(rows);
  CHECK(csv.rfind("units,accuracy", 0) == 0);
  const auto set = make_sequences(d, 10);
  const auto a = lstm_cross_validate(set, 3, 4, cfg, 1), b = lstm_cross_validate(set, 3, 4, cfg, 4);
  CHECK(a.fold_accuracy == b.fold_accuracy);
  CHECK(a.pooled.total == set.size());
}

TEST_CASE("model JSON round trip") {
  const auto d = temporal_dataset(6, 10, 1);
  LstmTrainConfig cfg;
  cfg.epochs = 2;
  cfg.sequence_len = 5;
  const auto m = bptt_train(d, 3, cfg);
  const auto back = lstm_from_json(to_json(m));
  CHECK(back == m);
}
