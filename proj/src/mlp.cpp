#include "devo/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "devo/error.hpp"
#include "devo/parallel.hpp"
#include "devo/rng.hpp"

namespace devo {
namespace {

constexpr std::uint64_t kCvFoldTag = 0xc7f01d;
constexpr std::uint64_t kShuffleTag = 0x5aff1e;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void softmax_inplace(Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  z = (z.array() - top).exp().matrix();
  z /= z.sum();
}

// Reusable buffers for one forward/backward pass.
struct Workspace {
  std::vector<Eigen::VectorXd> act;  // act[0] = input, act.back() = probabilities
  std::vector<Eigen::VectorXd> delta;

  explicit Workspace(const MlpModel& m) {
    for (int n : m.layer_sizes) act.emplace_back(Eigen::VectorXd::Zero(n));
    for (std::size_t l = 1; l < m.layer_sizes.size(); ++l) delta.emplace_back(Eigen::VectorXd::Zero(m.layer_sizes[l]));
  }
};

void run_forward(const MlpModel& m, Workspace& ws) {
  const std::size_t layers = m.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    auto& out = ws.act[l + 1];
    out.noalias() = m.weights[l] * ws.act[l];
    out += m.biases[l];
    if (l + 1 < layers)
      out = out.unaryExpr([](double z) { return sigmoid(z); });
    else
      softmax_inplace(out);
  }
}

// Adds the single-sample cross-entropy gradient (scaled by `scale`) into grad.
void run_backward(const MlpModel& m, Workspace& ws, int label, double scale, MlpGradient& grad) {
  const std::size_t layers = m.weights.size();
  ws.delta[layers - 1] = ws.act.back();
  ws.delta[layers - 1](label) -= 1.0;
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l].noalias() += scale * ws.delta[l] * ws.act[l].transpose();
    grad.biases[l] += scale * ws.delta[l];
    if (l > 0) {
      ws.delta[l - 1].noalias() = m.weights[l].transpose() * ws.delta[l];
      ws.delta[l - 1].array() *= ws.act[l].array() * (1.0 - ws.act[l].array());
    }
  }
}

MlpGradient zero_gradient(const MlpModel& m) {
  MlpGradient g;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(m.biases[l].size()));
  }
  return g;
}

bool finite(const MlpGradient& g) {
  for (std::size_t l = 0; l < g.weights.size(); ++l)
    if (!g.weights[l].allFinite() || !g.biases[l].allFinite()) return false;
  return true;
}

void load_input(const MlpModel& m, std::span<const double> input, Eigen::VectorXd& dst) {
  require(input.size() == m.input_size(), ErrorKind::ShapeError,
          "input has " + std::to_string(input.size()) + " features, model expects " + std::to_string(m.input_size()));
  if (m.standardizer.empty())
    dst = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  else
    m.standardizer.apply(input, dst);
}

std::vector<std::size_t> all_rows(const FeatureDataset& data, std::span<const std::size_t> rows) {
  if (!rows.empty()) return {rows.begin(), rows.end()};
  std::vector<std::size_t> out(data.rows());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

void apply_update(MlpModel& m, MlpVelocity& v, const MlpGradient& g, double lr, double momentum) {
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    v.weights[l] = momentum * v.weights[l] - lr * g.weights[l];
    v.biases[l] = momentum * v.biases[l] - lr * g.biases[l];
    m.weights[l] += v.weights[l];
    m.biases[l] += v.biases[l];
  }
}

MlpVelocity zero_velocity(const MlpModel& m) {
  const auto g = zero_gradient(m);
  return {g.weights, g.biases};
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::ConfigError, "MLP epochs must be at least 1");
  require(learning_rate > 0.0, ErrorKind::ConfigError, "MLP learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::ConfigError, "MLP momentum must lie in [0,1)");
  require(decay >= 0.0, ErrorKind::ConfigError, "MLP decay must be non-negative");
}

Standardizer Standardizer::fit(const FeatureDataset& data, std::span<const std::size_t> rows) {
  Standardizer s;
  const std::size_t d = data.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += data.at(r, c);
  for (double& m : s.mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = data.at(r, c) - s.mean[c];
      var[c] += diff * diff;
    }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / n);
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> in, Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t c = 0; c < in.size(); ++c) out(static_cast<Eigen::Index>(c)) = (in[c] - mean[c]) / scale[c];
}

MlpModel MlpModel::zeros(std::vector<int> sizes) {
  require(sizes.size() >= 2, ErrorKind::ShapeError, "an MLP needs input and output layers");
  for (int n : sizes) require(n >= 1, ErrorKind::ShapeError, "layer sizes must be positive");
  MlpModel m;
  m.layer_sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    m.weights.emplace_back(Eigen::MatrixXd::Zero(m.layer_sizes[l + 1], m.layer_sizes[l]));
    m.biases.emplace_back(Eigen::VectorXd::Zero(m.layer_sizes[l + 1]));
  }
  for (int k = 0; k < m.layer_sizes.back(); ++k) m.class_names.push_back(std::to_string(k));
  return m;
}

MlpModel MlpModel::random(std::vector<int> sizes, std::uint64_t seed, double bound) {
  MlpModel m = zeros(std::move(sizes));
  Rng rng(seed);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c)
      for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) m.weights[l](r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) m.biases[l](r) = rng.uniform(-bound, bound);
  }
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

bool MlpModel::operator==(const MlpModel& o) const {
  if (layer_sizes != o.layer_sizes || class_names != o.class_names || standardizer.mean != o.standardizer.mean ||
      standardizer.scale != o.standardizer.scale)
    return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
  return true;
}

Eigen::VectorXd forward(const MlpModel& model, std::span<const double> input) {
  Workspace ws(model);
  load_input(model, input, ws.act[0]);
  run_forward(model, ws);
  return ws.act.back();
}

int predict(const MlpModel& model, std::span<const double> input) {
  Eigen::Index best = 0;
  forward(model, input).maxCoeff(&best);
  return static_cast<int>(best);
}

double loss(const MlpModel& model, const FeatureDataset& data, std::span<const std::size_t> rows) {
  const auto idx = all_rows(data, rows);
  require(!idx.empty(), ErrorKind::DatasetError, "loss over an empty dataset");
  Workspace ws(model);
  double total = 0.0;
  for (std::size_t r : idx) {
    require(static_cast<std::size_t>(data.labels[r]) < model.output_size(), ErrorKind::DatasetError,
            "label outside the model's class set");
    load_input(model, data.row(r), ws.act[0]);
    run_forward(model, ws);
    total -= std::log(std::max(ws.act.back()(data.labels[r]), std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(idx.size());
}

MlpGradient gradient(const MlpModel& model, const FeatureDataset& data, std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorKind::DatasetError, "gradient over an empty batch");
  Workspace ws(model);
  auto grad = zero_gradient(model);
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    load_input(model, data.row(r), ws.act[0]);
    run_forward(model, ws);
    run_backward(model, ws, data.labels[r], scale, grad);
  }
  return grad;
}

void backprop_step(MlpModel& model, MlpVelocity& velocity, const FeatureDataset& data,
                   std::span<const std::size_t> rows, double learning_rate, double momentum) {
  if (velocity.weights.empty()) velocity = zero_velocity(model);
  const auto grad = gradient(model, data, rows);
  require(finite(grad), ErrorKind::GradientOverflow, "non-finite MLP gradient");
  apply_update(model, velocity, grad, learning_rate, momentum);
}

MlpModel train(const TopologyGenome& genome, const FeatureDataset& data, const TrainConfig& config,
               std::span<const std::size_t> rows) {
  config.validate();
  require(valid(genome), ErrorKind::ConfigError, "topology genome outside 1..3 layers of 1..100 neurons");
  const auto idx = all_rows(data, rows);
  std::set<int> present;
  for (std::size_t r : idx) present.insert(data.labels[r]);
  require(data.cols() >= 1, ErrorKind::DatasetError, "training data has no features");
  require(present.size() >= 2, ErrorKind::DatasetError, "training data needs rows from at least two classes");

  std::vector<int> sizes{static_cast<int>(data.cols())};
  sizes.insert(sizes.end(), genome.layers.begin(), genome.layers.end());
  sizes.push_back(static_cast<int>(data.class_count()));
  MlpModel model = MlpModel::random(sizes, config.seed);
  model.class_names = data.class_names;
  if (config.standardize) model.standardizer = Standardizer::fit(data, idx);

  // standardised inputs, one column per training row
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.cols()), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = idx[static_cast<std::size_t>(i)];
    if (model.standardizer.empty())
      x.col(i) = Eigen::Map<const Eigen::VectorXd>(data.row(r).data(), x.rows());
    else
      model.standardizer.apply(data.row(r), x.col(i));
  }

  Workspace ws(model);
  auto grad = zero_gradient(model);
  auto velocity = zero_velocity(model);
  Rng rng(derive_seed(config.seed, {kShuffleTag}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate / (1.0 + config.decay * static_cast<double>(epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Eigen::Index i : order) {
      for (std::size_t l = 0; l < grad.weights.size(); ++l) {
        grad.weights[l].setZero();
        grad.biases[l].setZero();
      }
      ws.act[0] = x.col(i);
      run_forward(model, ws);
      run_backward(model, ws, data.labels[idx[static_cast<std::size_t>(i)]], 1.0, grad);
      require(finite(grad), ErrorKind::GradientOverflow,
              "non-finite MLP gradient at epoch " + std::to_string(epoch));
      apply_update(model, velocity, grad, lr, config.momentum);
    }
  }
  return model;
}

CvResult cross_validate(const TopologyGenome& genome, const FeatureDataset& data, std::size_t folds,
                        const TrainConfig& config, unsigned threads) {
  const auto order = canonical_order(data);
  std::vector<int> labels(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) labels[i] = data.labels[order[i]];
  const auto fold = stratified_folds(labels, folds, derive_seed(config.seed, {kCvFoldTag}));

  std::vector<Evaluation> per_fold(folds);
  parallel_for(folds, threads, [&](std::size_t f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < order.size(); ++i)
      (fold[i] == static_cast<int>(f) ? test_rows : train_rows).push_back(order[i]);
    TrainConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, {kCvFoldTag, f});
    const auto model = train(genome, data, fold_config, train_rows);
    std::vector<int> truth, predicted;
    for (std::size_t r : test_rows) {
      truth.push_back(data.labels[r]);
      predicted.push_back(predict(model, data.row(r)));
    }
    per_fold[f] = evaluate(truth, predicted, data.class_count());
  });

  CvResult result;
  for (const auto& ev : per_fold) {
    accumulate(result.pooled, ev);
    result.fold_accuracy.push_back(ev.accuracy);
  }
  result.mean_accuracy = std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) /
                         static_cast<double>(folds);
  return result;
}

double cv_accuracy(const TopologyGenome& genome, const FeatureDataset& data, std::size_t folds,
                   const TrainConfig& config, unsigned threads) {
  return cross_validate(genome, data, folds, config, threads).pooled.accuracy;
}

std::string to_json(const MlpModel& model) {
  nlohmann::json doc;
  doc["format"] = "devo-model";
  doc["version"] = 1;
  doc["kind"] = "mlp";
  doc["layer_sizes"] = model.layer_sizes;
  doc["class_names"] = model.class_names;
  doc["standardizer"] = {{"mean", model.standardizer.mean}, {"scale", model.standardizer.scale}};
  nlohmann::json weights = nlohmann::json::array(), biases = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(flat);
    biases.push_back(std::vector<double>(model.biases[l].data(), model.biases[l].data() + model.biases[l].size()));
  }
  doc["weights"] = weights;
  doc["biases"] = biases;
  return doc.dump();
}

MlpModel mlp_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model JSON: ") + e.what());
  }
  require(doc.value("format", "") == "devo-model" && doc.value("kind", "") == "mlp", ErrorKind::SchemaError,
          "not an MLP model container");
  require(doc.value("version", 0) == 1, ErrorKind::SchemaError, "unsupported model container version");
  try {
    MlpModel m = MlpModel::zeros(doc.at("layer_sizes").get<std::vector<int>>());
    m.class_names = doc.at("class_names").get<std::vector<std::string>>();
    m.standardizer.mean = doc.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.scale = doc.at("standardizer").at("scale").get<std::vector<double>>();
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      const auto flat = doc.at("weights").at(l).get<std::vector<double>>();
      const auto bias = doc.at("biases").at(l).get<std::vector<double>>();
      auto& w = m.weights[l];
      require(flat.size() == static_cast<std::size_t>(w.size()) && bias.size() == static_cast<std::size_t>(m.biases[l].size()),
              ErrorKind::SchemaError, "model parameter block has the wrong size");
      for (Eigen::Index r = 0, k = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[static_cast<std::size_t>(k++)];
      for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) m.biases[l](r) = bias[static_cast<std::size_t>(r)];
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, std::string("model JSON: ") + e.what());
  }
}

}  // namespace devo
