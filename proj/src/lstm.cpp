#include "devo/lstm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "devo/error.hpp"
#include "devo/parallel.hpp"
#include "devo/rng.hpp"
#include "text.hpp"

namespace devo {
namespace {

constexpr std::uint64_t kInitTag = 0x1a1717;
constexpr std::uint64_t kBatchTag = 0xba7c4;
constexpr std::uint64_t kCvFoldTag = 0xc7f01e;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp().matrix();
  return p / p.sum();
}

// Forward pass record for one sequence.
struct Tape {
  std::vector<Eigen::VectorXd> z;  // [h_{t-1}; x_t]
  std::vector<CellStep> steps;
  std::vector<Eigen::VectorXd> c_prev;
  Eigen::VectorXd probs;
};

Eigen::MatrixXd standardized(const LstmModel& m, const Eigen::MatrixXd& seq) {
  require(static_cast<std::size_t>(seq.rows()) == m.features, ErrorKind::ShapeError,
          "sequence has " + std::to_string(seq.rows()) + " features, model expects " + std::to_string(m.features));
  if (m.standardizer.empty()) return seq;
  Eigen::MatrixXd out(seq.rows(), seq.cols());
  for (Eigen::Index t = 0; t < seq.cols(); ++t)
    for (Eigen::Index r = 0; r < seq.rows(); ++r)
      out(r, t) = (seq(r, t) - m.standardizer.mean[static_cast<std::size_t>(r)]) /
                  m.standardizer.scale[static_cast<std::size_t>(r)];
  return out;
}

Tape run_forward(const LstmModel& m, const Eigen::MatrixXd& raw) {
  require(raw.cols() > 0, ErrorKind::EmptySequence, "sequence has no time steps");
  const Eigen::MatrixXd x = standardized(m, raw);
  const auto H = static_cast<Eigen::Index>(m.units);
  Tape tape;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H);
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    Eigen::VectorXd z(H + x.rows());
    z << h, x.col(t);
    tape.c_prev.push_back(c);
    auto step = cell_step(m, h, c, x.col(t));
    h = step.h;
    c = step.c;
    tape.z.push_back(std::move(z));
    tape.steps.push_back(std::move(step));
  }
  tape.probs = softmax(m.readout_weights * h + m.readout_biases);
  return tape;
}

LstmGradient zero_gradient(const LstmModel& m) {
  return {Eigen::MatrixXd::Zero(m.gate_weights.rows(), m.gate_weights.cols()),
          Eigen::VectorXd::Zero(m.gate_biases.size()),
          Eigen::MatrixXd::Zero(m.readout_weights.rows(), m.readout_weights.cols()),
          Eigen::VectorXd::Zero(m.readout_biases.size())};
}

// Accumulates scale * d(-log p_label)/d(params) for one sequence.
void run_backward(const LstmModel& m, const Tape& tape, int label, double scale, LstmGradient& g) {
  const auto H = static_cast<Eigen::Index>(m.units);
  Eigen::VectorXd dy = tape.probs;
  dy(label) -= 1.0;
  dy *= scale;
  const auto& last = tape.steps.back();
  g.readout_weights.noalias() += dy * last.h.transpose();
  g.readout_biases += dy;

  Eigen::VectorXd dh = m.readout_weights.transpose() * dy;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dgate(4 * H);
  for (std::size_t t = tape.steps.size(); t-- > 0;) {
    const auto& s = tape.steps[t];
    const Eigen::ArrayXd tc = s.c.array().tanh();
    dc.array() += dh.array() * s.output.array() * (1.0 - tc.square());
    dgate.segment(0, H) = (dc.array() * tape.c_prev[t].array() * s.forget.array() * (1.0 - s.forget.array())).matrix();
    dgate.segment(H, H) = (dc.array() * s.candidate.array() * s.input.array() * (1.0 - s.input.array())).matrix();
    dgate.segment(2 * H, H) = (dc.array() * s.input.array() * (1.0 - s.candidate.array().square())).matrix();
    dgate.segment(3 * H, H) = (dh.array() * tc * s.output.array() * (1.0 - s.output.array())).matrix();
    g.gate_weights.noalias() += dgate * tape.z[t].transpose();
    g.gate_biases += dgate;
    dh = (m.gate_weights.leftCols(H).transpose() * dgate);
    dc = (dc.array() * s.forget.array()).matrix();
  }
}

void xavier_fill(Eigen::MatrixXd& w, double fan_in, double fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index c = 0; c < w.cols(); ++c)
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
}

std::vector<std::size_t> all_of(std::size_t n, std::span<const std::size_t> which) {
  if (!which.empty()) return {which.begin(), which.end()};
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

Standardizer fit_standardizer(const SequenceSet& set, std::span<const std::size_t> which) {
  Standardizer s;
  s.mean.assign(set.features, 0.0);
  s.scale.assign(set.features, 1.0);
  double n = 0.0;
  for (std::size_t i : which) {
    const auto& q = set.sequences[i];
    for (Eigen::Index t = 0; t < q.cols(); ++t, n += 1.0)
      for (Eigen::Index r = 0; r < q.rows(); ++r) s.mean[static_cast<std::size_t>(r)] += q(r, t);
  }
  if (n == 0.0) return s;
  for (double& v : s.mean) v /= n;
  std::vector<double> var(set.features, 0.0);
  for (std::size_t i : which) {
    const auto& q = set.sequences[i];
    for (Eigen::Index t = 0; t < q.cols(); ++t)
      for (Eigen::Index r = 0; r < q.rows(); ++r) {
        const double d = q(r, t) - s.mean[static_cast<std::size_t>(r)];
        var[static_cast<std::size_t>(r)] += d * d;
      }
  }
  for (std::size_t c = 0; c < set.features; ++c) {
    const double sd = std::sqrt(var[c] / n);
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

struct Adam {
  LstmGradient m, v;
  std::size_t t = 0;
};

template <class P, class G>
void adam_block(P& param, const G& grad, G& m, G& v, const LstmTrainConfig& c, double correction1, double correction2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  param.array() -= c.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.adam_epsilon);
}

void adam_update(LstmModel& model, const LstmGradient& g, Adam& state, const LstmTrainConfig& c) {
  ++state.t;
  const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  adam_block(model.gate_weights, g.gate_weights, state.m.gate_weights, state.v.gate_weights, c, c1, c2);
  adam_block(model.gate_biases, g.gate_biases, state.m.gate_biases, state.v.gate_biases, c, c1, c2);
  adam_block(model.readout_weights, g.readout_weights, state.m.readout_weights, state.v.readout_weights, c, c1, c2);
  adam_block(model.readout_biases, g.readout_biases, state.m.readout_biases, state.v.readout_biases, c, c1, c2);
}

std::vector<double> flatten(const Eigen::MatrixXd& w) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) out.push_back(w(r, c));
  return out;
}

void unflatten(const std::vector<double>& flat, Eigen::MatrixXd& w) {
  require(flat.size() == static_cast<std::size_t>(w.size()), ErrorKind::SchemaError,
          "model parameter block has the wrong size");
  for (Eigen::Index r = 0, k = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[static_cast<std::size_t>(k++)];
}

}  // namespace

LstmModel LstmModel::zeros(std::size_t units, std::size_t features, std::size_t classes) {
  require(units >= 1, ErrorKind::ConfigError, "LSTM needs at least one unit");
  require(features >= 1 && classes >= 1, ErrorKind::ShapeError, "LSTM needs features and classes");
  LstmModel m;
  m.units = units;
  m.features = features;
  const auto H = static_cast<Eigen::Index>(units);
  m.gate_weights = Eigen::MatrixXd::Zero(4 * H, H + static_cast<Eigen::Index>(features));
  m.gate_biases = Eigen::VectorXd::Zero(4 * H);
  m.readout_weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), H);
  m.readout_biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes));
  for (std::size_t k = 0; k < classes; ++k) m.class_names.push_back(std::to_string(k));
  return m;
}

LstmModel LstmModel::xavier(std::size_t units, std::size_t features, std::size_t classes, std::uint64_t seed) {
  LstmModel m = zeros(units, features, classes);
  Rng rng(seed);
  const double u = static_cast<double>(units);
  xavier_fill(m.gate_weights, u + static_cast<double>(features), u, rng);
  xavier_fill(m.readout_weights, u, static_cast<double>(classes), rng);
  return m;
}

std::size_t LstmModel::parameter_count() const {
  return static_cast<std::size_t>(gate_weights.size() + gate_biases.size() + readout_weights.size() +
                                  readout_biases.size());
}

bool LstmModel::operator==(const LstmModel& o) const {
  return units == o.units && features == o.features && gate_weights == o.gate_weights &&
         gate_biases == o.gate_biases && readout_weights == o.readout_weights && readout_biases == o.readout_biases &&
         class_names == o.class_names && standardizer.mean == o.standardizer.mean &&
         standardizer.scale == o.standardizer.scale;
}

CellStep cell_step(const LstmModel& m, const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                   const Eigen::VectorXd& x) {
  const auto H = static_cast<Eigen::Index>(m.units);
  require(h_prev.size() == H && c_prev.size() == H && static_cast<std::size_t>(x.size()) == m.features,
          ErrorKind::ShapeError, "cell_step dimensions do not match the model");
  const Eigen::VectorXd pre =
      m.gate_weights.leftCols(H) * h_prev + m.gate_weights.rightCols(x.size()) * x + m.gate_biases;
  CellStep s;
  s.forget = pre.segment(0, H).unaryExpr([](double z) { return sigmoid(z); });
  s.input = pre.segment(H, H).unaryExpr([](double z) { return sigmoid(z); });
  s.candidate = pre.segment(2 * H, H).array().tanh().matrix();
  s.output = pre.segment(3 * H, H).unaryExpr([](double z) { return sigmoid(z); });
  s.c = (s.forget.array() * c_prev.array() + s.input.array() * s.candidate.array()).matrix();
  s.h = (s.output.array() * s.c.array().tanh()).matrix();
  return s;
}

Eigen::VectorXd forward_sequence(const LstmModel& model, const Eigen::MatrixXd& sequence) {
  return run_forward(model, sequence).probs;
}

int predict(const LstmModel& model, const Eigen::MatrixXd& sequence) {
  Eigen::Index best = 0;
  forward_sequence(model, sequence).maxCoeff(&best);
  return static_cast<int>(best);
}

SequenceSet make_sequences(const FeatureDataset& data, std::size_t length, std::span<const std::size_t> rows) {
  require(length >= 1, ErrorKind::ConfigError, "sequence length must be at least 1");
  const auto idx = all_of(data.rows(), rows);
  SequenceSet set;
  set.class_names = data.class_names;
  set.features = data.cols();
  const auto d = static_cast<Eigen::Index>(data.cols());
  std::vector<std::size_t> run;
  auto flush = [&] {
    for (std::size_t start = 0; start < run.size(); start += length) {
      const std::size_t n = std::min(length, run.size() - start);
      Eigen::MatrixXd seq(d, static_cast<Eigen::Index>(n));
      std::vector<std::size_t> src;
      for (std::size_t k = 0; k < n; ++k) {
        const auto r = run[start + k];
        seq.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(data.row(r).data(), d);
        src.push_back(r);
      }
      set.sequences.push_back(std::move(seq));
      set.labels.push_back(data.labels[run[start]]);
      set.source_rows.push_back(std::move(src));
    }
    run.clear();
  };
  for (std::size_t r : idx) {
    if (!run.empty()) {
      const auto prev = run.back();
      const bool same_group = data.groups.empty() || data.groups[prev] == data.groups[r];
      if (!same_group || data.labels[prev] != data.labels[r]) flush();
    }
    run.push_back(r);
  }
  flush();
  return set;
}

void LstmTrainConfig::validate() const {
  require(batch_size >= 1, ErrorKind::ConfigError, "LSTM batch size must be at least 1");
  require(sequence_len >= 1, ErrorKind::ConfigError, "LSTM sequence length must be at least 1");
  require(learning_rate > 0.0, ErrorKind::ConfigError, "LSTM learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::ConfigError,
          "Adam decay rates must lie in [0,1)");
  require(adam_epsilon > 0.0 && clip_norm > 0.0, ErrorKind::ConfigError, "Adam epsilon and clip norm must be positive");
}

double LstmGradient::norm() const {
  return std::sqrt(gate_weights.squaredNorm() + gate_biases.squaredNorm() + readout_weights.squaredNorm() +
                   readout_biases.squaredNorm());
}

bool LstmGradient::finite() const {
  return gate_weights.allFinite() && gate_biases.allFinite() && readout_weights.allFinite() &&
         readout_biases.allFinite();
}

double sequence_loss(const LstmModel& model, const SequenceSet& set, std::span<const std::size_t> which) {
  const auto idx = all_of(set.size(), which);
  require(!idx.empty(), ErrorKind::DatasetError, "loss over an empty sequence set");
  double total = 0.0;
  for (std::size_t i : idx) {
    const auto p = forward_sequence(model, set.sequences[i]);
    total -= std::log(std::max(p(set.labels[i]), std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(idx.size());
}

LstmGradient bptt_gradient(const LstmModel& model, const SequenceSet& set, std::span<const std::size_t> which) {
  require(!which.empty(), ErrorKind::DatasetError, "gradient over an empty batch");
  auto g = zero_gradient(model);
  const double scale = 1.0 / static_cast<double>(which.size());
  for (std::size_t i : which) {
    require(static_cast<std::size_t>(set.labels[i]) < model.class_count(), ErrorKind::DatasetError,
            "label outside the model's class set");
    run_backward(model, run_forward(model, set.sequences[i]), set.labels[i], scale, g);
  }
  return g;
}

LstmModel bptt_train(const SequenceSet& set, std::size_t units, const LstmTrainConfig& config,
                     std::span<const std::size_t> which) {
  config.validate();
  const auto idx = all_of(set.size(), which);
  require(!idx.empty(), ErrorKind::EmptySequence, "no training sequences");
  std::set<int> present;
  for (std::size_t i : idx) present.insert(set.labels[i]);
  require(present.size() >= 2, ErrorKind::DatasetError, "training data needs sequences from at least two classes");

  LstmModel model = LstmModel::xavier(units, set.features, set.class_names.size(), derive_seed(config.seed, {kInitTag}));
  model.class_names = set.class_names;
  if (config.standardize) model.standardizer = fit_standardizer(set, idx);

  Adam adam{zero_gradient(model), zero_gradient(model)};
  Rng rng(derive_seed(config.seed, {kBatchTag}));
  std::vector<std::size_t> order = idx;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      auto g = bptt_gradient(model, set, batch);
      if (!g.finite())
        fail(ErrorKind::GradientOverflow, "non-finite LSTM gradient at epoch " + std::to_string(epoch));
      const double n = g.norm();
      if (n > config.clip_norm) {
        const double k = config.clip_norm / n;
        g.gate_weights *= k;
        g.gate_biases *= k;
        g.readout_weights *= k;
        g.readout_biases *= k;
      }
      adam_update(model, g, adam, config);
      require(model.gate_weights.allFinite() && model.readout_weights.allFinite(), ErrorKind::GradientOverflow,
              "LSTM parameters diverged at epoch " + std::to_string(epoch));
    }
  }
  return model;
}

LstmModel bptt_train(const FeatureDataset& data, std::size_t units, const LstmTrainConfig& config) {
  return bptt_train(make_sequences(data, config.sequence_len), units, config);
}

LstmCvResult lstm_cross_validate(const SequenceSet& set, std::size_t units, std::size_t folds,
                                 const LstmTrainConfig& config, unsigned threads) {
  const auto fold = stratified_folds(set.labels, folds, derive_seed(config.seed, {kCvFoldTag}));
  std::vector<Evaluation> per_fold(folds);
  parallel_for(folds, threads, [&](std::size_t f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < set.size(); ++i) (fold[i] == static_cast<int>(f) ? test_idx : train_idx).push_back(i);
    LstmTrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, {kCvFoldTag, f});
    const auto model = bptt_train(set, units, fold_config, train_idx);
    std::vector<int> truth, predicted;
    for (std::size_t i : test_idx) {
      truth.push_back(set.labels[i]);
      predicted.push_back(predict(model, set.sequences[i]));
    }
    per_fold[f] = evaluate(truth, predicted, set.class_names.size());
  });
  LstmCvResult result;
  for (const auto& ev : per_fold) {
    accumulate(result.pooled, ev);
    result.fold_accuracy.push_back(ev.accuracy);
  }
  return result;
}

std::vector<SweepRow> unit_sweep(const FeatureDataset& data, std::span<const std::size_t> units_list,
                                 const LstmTrainConfig& config, std::size_t folds, unsigned threads) {
  require(!units_list.empty(), ErrorKind::ConfigError, "unit sweep list is empty");
  const auto set = make_sequences(data, config.sequence_len);
  std::vector<SweepRow> rows;
  for (std::size_t units : units_list) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cv = lstm_cross_validate(set, units, folds, config, threads);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    rows.push_back({units, cv.pooled.accuracy, dt.count()});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "units,accuracy\n";
  for (const auto& r : rows) out << r.units << ',' << text::format_double(r.accuracy) << '\n';
  return out.str();
}

std::string to_json(const LstmModel& model) {
  nlohmann::json doc;
  doc["format"] = "devo-model";
  doc["version"] = 1;
  doc["kind"] = "lstm";
  doc["units"] = model.units;
  doc["features"] = model.features;
  doc["class_names"] = model.class_names;
  doc["standardizer"] = {{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}};
  doc["gate_weights"] = flatten(model.gate_weights);
  doc["gate_biases"] = std::vector<double>(model.gate_biases.data(), model.gate_biases.data() + model.gate_biases.size());
  doc["readout_weights"] = flatten(model.readout_weights);
  doc["readout_biases"] =
      std::vector<double>(model.readout_biases.data(), model.readout_biases.data() + model.readout_biases.size());
  return doc.dump();
}

LstmModel lstm_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model JSON: ") + e.what());
  }
  require(doc.value("format", "") == "devo-model" && doc.value("kind", "") == "lstm", ErrorKind::SchemaError,
          "not an LSTM model container");
  require(doc.value("version", 0) == 1, ErrorKind::SchemaError, "unsupported model container version");
  try {
    const auto names = doc.at("class_names").get<std::vector<std::string>>();
    LstmModel m = LstmModel::zeros(doc.at("units").get<std::size_t>(), doc.at("features").get<std::size_t>(), names.size());
    m.class_names = names;
    m.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
    unflatten(doc.at("gate_weights").get<std::vector<double>>(), m.gate_weights);
    Eigen::MatrixXd gb = m.gate_biases;
    unflatten(doc.at("gate_biases").get<std::vector<double>>(), gb);
    m.gate_biases = gb;
    unflatten(doc.at("readout_weights").get<std::vector<double>>(), m.readout_weights);
    Eigen::MatrixXd rb = m.readout_biases;
    unflatten(doc.at("readout_biases").get<std::vector<double>>(), rb);
    m.readout_biases = rb;
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, std::string("model JSON: ") + e.what());
  }
}

}  // namespace devo
