#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "devo/error.hpp"
#include "devo/rng.hpp"

namespace devo {

inline constexpr double kAlphaCap = 10.0;

struct BoostConfig {
  std::size_t estimators = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// SAMME stage weight ln((1-e)/e) + ln(K-1); a perfect stage gets kAlphaCap.
double samme_alpha(double error, std::size_t classes);

/// Argmax of the alpha-weighted tally; ties go to the lower class index.
int weighted_vote(std::span<const int> predictions, std::span<const double> alphas, std::size_t classes);

struct BoostStage {
  std::size_t stage = 0;
  std::size_t attempts = 0;
  double error = 0.0;
  double alpha = 0.0;
  bool kept = false;
};

struct BoostTrace {
  std::vector<BoostStage> stages;
  std::vector<std::vector<double>> weights;  // row weights after every kept stage
  bool stopped_early = false;
};

template <typename Model>
struct BoostedEnsemble {
  std::vector<Model> members;
  std::vector<double> alphas;
  std::vector<std::string> class_names;
  std::size_t estimators = 0;
};

namespace detail {
inline constexpr std::uint64_t kResampleTag = 0x4e5a;
inline constexpr std::uint64_t kStageTag = 0x57a9e;
}  // namespace detail

/// SAMME boosting. `trainer(sample, seed)` fits a model to the listed item
/// indices (drawn with replacement from the current weights);
/// `predictor(model, i)` classifies training item i. Failing stages are
/// redrawn once and then dropped.
template <typename Trainer, typename Predictor>
auto boost(Trainer&& trainer, Predictor&& predictor, std::span<const int> labels, std::vector<std::string> class_names,
           const BoostConfig& config, BoostTrace* trace = nullptr)
    -> BoostedEnsemble<decltype(trainer(std::span<const std::size_t>{}, std::uint64_t{}))> {
  using Model = decltype(trainer(std::span<const std::size_t>{}, std::uint64_t{}));
  config.validate();
  const std::size_t n = labels.size();
  const std::size_t k = class_names.size();
  require(k >= 2, ErrorKind::DatasetError, "boosting needs at least two classes");
  require(n >= 1, ErrorKind::DatasetError, "boosting over an empty dataset");

  BoostedEnsemble<Model> ensemble;
  ensemble.class_names = std::move(class_names);
  ensemble.estimators = config.estimators;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const double chance_error = 1.0 - 1.0 / static_cast<double>(k);
  std::vector<std::size_t> sample(n);
  std::vector<bool> wrong(n);

  for (std::size_t t = 0; t < config.estimators; ++t) {
    BoostStage stage{t, 0, 0.0, 0.0, false};
    for (std::size_t attempt = 0; attempt < 2 && !stage.kept; ++attempt) {
      ++stage.attempts;
      Rng rng(derive_seed(config.seed, {detail::kResampleTag, t, attempt}));
      std::discrete_distribution<std::size_t> draw(w.begin(), w.end());
      for (auto& s : sample) s = draw(rng.engine());
      Model model = trainer(std::span<const std::size_t>(sample), derive_seed(config.seed, {detail::kStageTag, t, attempt}));
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        wrong[i] = predictor(model, i) != labels[i];
        if (wrong[i]) err += w[i];
      }
      stage.error = err;
      if (err >= chance_error) continue;
      stage.alpha = samme_alpha(err, k);
      stage.kept = true;
      ensemble.members.push_back(std::move(model));
      ensemble.alphas.push_back(stage.alpha);
    }
    if (trace) trace->stages.push_back(stage);
    if (!stage.kept) continue;
    if (stage.error <= 0.0) {
      if (trace) {
        trace->weights.push_back(w);
        trace->stopped_early = true;
      }
      break;
    }
    const double boost_factor = std::exp(stage.alpha);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (wrong[i]) w[i] *= boost_factor;
      total += w[i];
    }
    for (auto& v : w) v /= total;
    if (trace) trace->weights.push_back(w);
  }
  require(!ensemble.members.empty(), ErrorKind::BoostFailure,
          "every boosting stage was no better than chance and was discarded");
  return ensemble;
}

/// `member_predict(model)` classifies the input with one member.
template <typename Model, typename MemberPredict>
int predict(const BoostedEnsemble<Model>& ensemble, MemberPredict&& member_predict) {
  std::vector<int> votes;
  votes.reserve(ensemble.members.size());
  for (const auto& m : ensemble.members) votes.push_back(member_predict(m));
  return weighted_vote(votes, ensemble.alphas, ensemble.class_names.size());
}

/// Container holding already-serialised member documents.
struct EnsembleDocument {
  std::string member_kind;
  std::vector<std::string> members;  // JSON text per member
  std::vector<double> alphas;
  std::vector<std::string> class_names;
  std::size_t estimators = 0;
};

std::string ensemble_to_json(const EnsembleDocument& doc);
EnsembleDocument ensemble_from_json(const std::string& text);

}  // namespace devo
