#include <doctest.h>

#include <cmath>
#include <numeric>

#include "devo/ensemble.hpp"
#include "devo/mlp.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace devo;

namespace {

// Predicts a fixed table; "training" ignores the sample.
struct TableModel {
  std::vector<int> answers;
};

FeatureDataset noisy_blobs(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.3);
  FeatureDataset d;
  d.feature_names = {"x", "y", "z"};
  d.class_names = {"a", "b", "c"};
  for (std::size_t i = 0; i < per_class; ++i)
    for (int k = 0; k < 3; ++k) {
      std::vector<double> row{noise(gen), noise(gen), noise(gen)};
      row[k] += 2.0;
      d.add_row(row, k, 0);
    }
  return d;
}

}  // namespace

TEST_CASE("SAMME stage weight") {
  CHECK(samme_alpha(0.25, 3) == doctest::Approx(1.7918).epsilon(1e-4 / 1.7918));
  CHECK(samme_alpha(0.25, 3) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  CHECK(samme_alpha(0.5, 2) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(samme_alpha(0.0, 3) == kAlphaCap);
  CHECK(samme_alpha(1e-30, 3) == kAlphaCap);
}

TEST_CASE("weighted vote and its tie rule") {
  const std::vector<int> votes{0, 1, 1, 2};
  CHECK(weighted_vote(votes, std::vector<double>{3.0, 1.0, 1.0, 2.5}, 3) == 0);
  CHECK(weighted_vote(votes, std::vector<double>{1.0, 1.0, 1.0, 1.5}, 3) == 1);
  CHECK(weighted_vote(std::vector<int>{2, 1}, std::vector<double>{1.0, 1.0}, 3) == 1);
}

TEST_CASE("weighted vote agrees with a class-by-class tally") {
  std::mt19937_64 gen(13);
  std::uniform_int_distribution<int> cls(0, 4), members(1, 12);
  std::uniform_real_distribution<double> alpha(0.01, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = members(gen);
    std::vector<int> votes(m);
    std::vector<double> alphas(m);
    for (int i = 0; i < m; ++i) {
      votes[i] = cls(gen);
      alphas[i] = alpha(gen);
    }
    CHECK(weighted_vote(votes, alphas, 5) == oracle::weighted_tally(votes, alphas, 5));
  }
}

TEST_CASE("vote is invariant to member order") {
  std::mt19937_64 gen(3);
  std::vector<int> votes{0, 2, 1, 2, 0, 1, 1};
  std::vector<double> alphas{0.3, 1.1, 0.7, 0.2, 0.9, 0.4, 0.05};
  const int ref = weighted_vote(votes, alphas, 3);
  std::vector<std::size_t> perm(votes.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < 50; ++t) {
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<int> v;
    std::vector<double> a;
    for (auto p : perm) {
      v.push_back(votes[p]);
      a.push_back(alphas[p]);
    }
    CHECK(weighted_vote(v, a, 3) == ref);
  }
}

TEST_CASE("row weights stay normalised and misclassified rows gain weight") {
  const std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1};
  std::size_t call = 0;
  auto trainer = [&](std::span<const std::size_t>, std::uint64_t) {
    // stage t gets row t wrong
    TableModel m{labels};
    m.answers[call % labels.size()] = (labels[call % labels.size()] + 1) % 3;
    ++call;
    return m;
  };
  auto predictor = [](const TableModel& m, std::size_t i) { return m.answers[i]; };
  BoostConfig cfg{6, 1};
  BoostTrace trace;
  const auto ens = boost(trainer, predictor, labels, {"a", "b", "c"}, cfg, &trace);
  CHECK(ens.members.size() == 6);
  REQUIRE(trace.weights.size() == 6);
  for (const auto& w : trace.weights) {
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
    for (double v : w) CHECK(v > 0.0);
  }
  // the first stage erred on row 0 only
  CHECK(trace.stages[0].error == doctest::Approx(1.0 / 8).epsilon(1e-14));
  CHECK(trace.weights[0][0] > trace.weights[0][1]);
  CHECK(trace.weights[0][1] == doctest::Approx(trace.weights[0][2]).epsilon(1e-15));
}

TEST_CASE("a perfect first learner stops boosting") {
  const std::vector<int> labels{0, 1, 1, 0};
  auto trainer = [&](std::span<const std::size_t>, std::uint64_t) { return TableModel{labels}; };
  auto predictor = [](const TableModel& m, std::size_t i) { return m.answers[i]; };
  BoostTrace trace;
  const auto ens = boost(trainer, predictor, labels, {"x", "y"}, BoostConfig{10, 3}, &trace);
  CHECK(ens.members.size() == 1);
  CHECK(ens.alphas[0] == kAlphaCap);
  CHECK(trace.stopped_early);
  CHECK(trace.stages.size() == 1);
}

TEST_CASE("one estimator gives the single member's predictions") {
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::vector<int> guess{0, 1, 0, 0, 1};
  auto trainer = [&](std::span<const std::size_t>, std::uint64_t) { return TableModel{guess}; };
  auto predictor = [](const TableModel& m, std::size_t i) { return m.answers[i]; };
  const auto ens = boost(trainer, predictor, labels, {"x", "y"}, BoostConfig{1, 3});
  REQUIRE(ens.members.size() == 1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    CHECK(predict(ens, [&](const TableModel& m) { return m.answers[i]; }) == guess[i]);
}

TEST_CASE("two members vote by alpha") {
  BoostedEnsemble<TableModel> ens;
  ens.members = {TableModel{{0, 0}}, TableModel{{1, 1}}};
  ens.alphas = {0.4, 0.9};
  ens.class_names = {"x", "y"};
  CHECK(predict(ens, [](const TableModel& m) { return m.answers[0]; }) == 1);
  ens.alphas = {0.9, 0.4};
  CHECK(predict(ens, [](const TableModel& m) { return m.answers[0]; }) == 0);
}

TEST_CASE("chance-level learners are retried, dropped, then fail") {
  const std::vector<int> labels{0, 1, 0, 1};
  std::size_t calls = 0;
  auto trainer = [&](std::span<const std::size_t>, std::uint64_t) {
    ++calls;
    return TableModel{{1, 0, 1, 0}};
  };
  auto predictor = [](const TableModel& m, std::size_t i) { return m.answers[i]; };
  BoostTrace trace;
  CHECK_THROWS_KIND(boost(trainer, predictor, labels, {"x", "y"}, BoostConfig{3, 1}, &trace), ErrorKind::BoostFailure);
  CHECK(calls == 6);
  for (const auto& s : trace.stages) {
    CHECK(s.attempts == 2);
    CHECK_FALSE(s.kept);
  }
}

TEST_CASE("boosted weak MLPs do at least as well as their best member") {
  const auto d = noisy_blobs(60, 4);
  // one sigmoid unit and two epochs keep each member well short of the data
  TrainConfig weak;
  weak.epochs = 2;
  const TopologyGenome genome{{1}};
  auto trainer = [&](std::span<const std::size_t> sample, std::uint64_t seed) {
    TrainConfig c = weak;
    c.seed = seed;
    return train(genome, d, c, sample);
  };
  auto predictor = [&](const MlpModel& m, std::size_t i) { return devo::predict(m, d.row(i)); };
  const auto ens = boost(trainer, predictor, d.labels, d.class_names, BoostConfig{10, 7});
  auto accuracy = [&](auto&& classify) {
    std::size_t ok = 0;
    for (std::size_t r = 0; r < d.rows(); ++r) ok += classify(r) == d.labels[r];
    return 100.0 * ok / d.rows();
  };
  double best_member = 0.0;
  for (const auto& m : ens.members)
    best_member = std::max(best_member, accuracy([&](std::size_t r) { return devo::predict(m, d.row(r)); }));
  const double boosted = accuracy([&](std::size_t r) {
    return predict(ens, [&](const MlpModel& m) { return devo::predict(m, d.row(r)); });
  });
  CHECK(ens.members.size() >= 5);
  CHECK(boosted >= best_member);
}

TEST_CASE("boosting is deterministic for a fixed seed") {
  const auto d = noisy_blobs(20, 9);
  TrainConfig weak;
  weak.epochs = 3;
  auto trainer = [&](std::span<const std::size_t> sample, std::uint64_t seed) {
    TrainConfig c = weak;
    c.seed = seed;
    return train(TopologyGenome{{3}}, d, c, sample);
  };
  auto predictor = [&](const MlpModel& m, std::size_t i) { return devo::predict(m, d.row(i)); };
  const auto a = boost(trainer, predictor, d.labels, d.class_names, BoostConfig{4, 1});
  const auto b = boost(trainer, predictor, d.labels, d.class_names, BoostConfig{4, 1});
  CHECK(a.alphas == b.alphas);
  REQUIRE(a.members.size() == b.members.size());
  for (std::size_t i = 0; i < a.members.size(); ++i) CHECK(a.members[i] == b.members[i]);
}

TEST_CASE("ensemble document round trip") {
  EnsembleDocument doc{"mlp", {"{\"a\":1}", "{\"b\":2}"}, {0.5, 1.25}, {"x", "y"}, 10};
  const auto back = ensemble_from_json(ensemble_to_json(doc));
  CHECK(back.member_kind == "mlp");
  CHECK(back.alphas == doc.alphas);
  CHECK(back.class_names == doc.class_names);
  CHECK(back.estimators == 10);
  REQUIRE(back.members.size() == 2);
  CHECK(back.members[1].find("\"b\"") != std::string::npos);
  CHECK_THROWS(ensemble_from_json("{\"kind\":\"other\"}"));
  BoostConfig bad{0, 1};
  CHECK_THROWS_KIND(bad.validate(), ErrorKind::ConfigError);
}
