#include <doctest.h>

#include <cmath>
#include <fstream>

#include "devo/cv.hpp"
#include "devo/selection.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace devo;

namespace {

std::vector<int> equal_width_bins(const std::vector<double>& x, int bins) {
  const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
  std::vector<int> out;
  for (double v : x) out.push_back(lo == hi ? 0 : std::min(bins - 1, static_cast<int>((v - lo) / ((hi - lo) / bins))));
  return out;
}

FeatureDataset table(const std::vector<std::vector<double>>& cols, const std::vector<int>& labels, int classes) {
  FeatureDataset d;
  for (std::size_t c = 0; c < cols.size(); ++c) d.feature_names.push_back("f" + std::to_string(c));
  for (int k = 0; k < classes; ++k) d.class_names.push_back("c" + std::to_string(k));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::vector<double> row;
    for (const auto& col : cols) row.push_back(col[r]);
    d.add_row(row, labels[r], 0);
  }
  return d;
}

}  // namespace

TEST_CASE("class entropy examples") {
  std::vector<int> weather(14, 0);
  for (int i = 0; i < 5; ++i) weather[i] = 1;
  CHECK(class_entropy(weather) == doctest::Approx(0.940286).epsilon(1e-6));
  CHECK(class_entropy(std::vector<int>{2, 2, 2}) == 0.0);
  CHECK(class_entropy(std::vector<int>{0, 1, 2, 3}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(class_entropy(std::vector<int>{0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_KIND(class_entropy(std::vector<int>{}), ErrorKind::DatasetError);
}

TEST_CASE("info gain matches a brute-force joint table") {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 20 + trial;
    const int bins = 2 + trial % 12;
    auto x = random_vector(n, gen, -5, 5);
    std::vector<int> y(n);
    for (auto& v : y) v = cls(gen);
    // make half the trials informative
    if (trial % 2 == 0)
      for (std::size_t i = 0; i < n; ++i) x[i] += 3.0 * y[i];
    const double ig = info_gain(y, x, bins);
    const double ref = oracle::info_gain_discrete(equal_width_bins(x, bins), y);
    CHECK(std::abs(ig - ref) < 1e-12);
  }
}

TEST_CASE("info gain stays in [0, H]") {
  std::mt19937_64 gen(1000);
  std::uniform_int_distribution<int> cls(0, 9), size(2, 300), nb(2, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(gen);
    std::vector<int> y(n);
    for (auto& v : y) v = cls(gen);
    const auto x = random_vector(n, gen);
    const double ig = info_gain(y, x, nb(gen));
    CHECK(ig >= 0.0);
    CHECK(ig <= class_entropy(y) + 1e-12);
  }
}

TEST_CASE("info gain of a perfectly predictive column equals H and of noise is near zero") {
  std::mt19937_64 gen(2);
  std::vector<int> y(3000);
  std::uniform_int_distribution<int> cls(0, 2);
  for (auto& v : y) v = cls(gen);
  std::vector<double> exact(y.begin(), y.end());
  CHECK(info_gain(y, exact, 10) == doctest::Approx(class_entropy(y)).epsilon(1e-12));
  const auto noise = random_vector(y.size(), gen);
  CHECK(info_gain(y, noise, 10) < 0.05);
  CHECK(info_gain(y, std::vector<double>(y.size(), 1.0), 10) == 0.0);
}

TEST_CASE("discretize edges and out-of-range values") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0};
  const auto d = discretize(x, 4);
  REQUIRE(d.bin_edges.size() == 3);
  CHECK(d.bin_edges[0] == 1.0);
  CHECK(d.bins == std::vector<int>{0, 1, 2, 3, 3});
  CHECK(bin_of(d.bin_edges, -10.0) == 0);
  CHECK(bin_of(d.bin_edges, 10.0) == 3);
  CHECK(discretize(std::vector<double>(4, 2.0), 5).bin_count == 1);
}

TEST_CASE("OneR on separable, constant and shuffled columns") {
  std::mt19937_64 gen(6);
  std::vector<int> y;
  std::vector<double> sep, flat;
  for (int i = 0; i < 90; ++i) {
    y.push_back(i % 3);
    sep.push_back(10.0 * (i % 3) + std::uniform_real_distribution<>(0, 1)(gen));
    flat.push_back(4.0);
  }
  const auto noise = random_vector(90, gen);
  const auto d = table({sep, flat, noise}, y, 3);
  CHECK(one_r(d, 0, 10, 10, 1) == 100.0);
  // every fold trains on 27 per class, so the constant rule picks class 0
  CHECK(one_r(d, 1, 10, 10, 1) == doctest::Approx(100.0 / 3.0));
  CHECK(one_r(d, 2, 10, 10, 1) < 60.0);
  CHECK(one_r(d, 0, 10, 10, 1) == one_r(d, 0, 10, 10, 1));
}

TEST_CASE("subset fitness examples") {
  const std::vector<double> gains{0.5, 0.3, 0.1, 0.0};
  AttributeMask m{{true, true, false, false}};
  CHECK(subset_fitness(gains, m, 0.01) == doctest::Approx(0.4 - 0.01 * 0.5).epsilon(1e-15));
  CHECK(subset_fitness(gains, AttributeMask::all(4), 0.0) == doctest::Approx(0.225));
  CHECK(subset_fitness(gains, AttributeMask::none(4)) == kUnfit);
  // the penalty breaks ties toward smaller masks
  AttributeMask one{{true, false, false, false}}, two{{true, false, false, false}};
  const std::vector<double> equal{0.5, 0.5, 0.5, 0.5};
  two.bits[1] = true;
  CHECK(subset_fitness(equal, one) > subset_fitness(equal, two));
  CHECK_THROWS_KIND(subset_fitness(gains, AttributeMask::all(3)), ErrorKind::ShapeError);
}

TEST_CASE("subset fitness from a dataset agrees with precomputed gains") {
  std::mt19937_64 gen(44);
  std::vector<int> y(120);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < 6; ++c) {
    auto col = random_vector(120, gen);
    for (std::size_t i = 0; i < 120; ++i) col[i] += 0.3 * c * y[i];
    cols.push_back(col);
  }
  const auto d = table(cols, y, 4);
  const auto gains = info_gain_all(d, 10, 3);
  AttributeMask m{{true, false, true, false, false, true}};
  CHECK(subset_fitness(d, m, 10) == doctest::Approx(subset_fitness(gains, m)).epsilon(1e-14));
}

TEST_CASE("project and mask files") {
  const auto d = table({{1, 2}, {3, 4}, {5, 6}}, {0, 1}, 2);
  AttributeMask m{{true, false, true}};
  const auto p = project(d, m);
  CHECK(p.feature_names == std::vector<std::string>{"f0", "f2"});
  CHECK(p.values == std::vector<double>{1, 5, 2, 6});
  CHECK(p.labels == d.labels);
  CHECK_THROWS_KIND(project(d, AttributeMask::none(3)), ErrorKind::EmptySelection);

  TempDir dir("mask");
  write_mask(d, m, dir / "m.txt");
  CHECK(read_mask(d, dir / "m.txt") == m);
  {
    std::ofstream f(dir / "bad.txt");
    f << "f0\nnope\n";
  }
  CHECK_THROWS_KIND(read_mask(d, dir / "bad.txt"), ErrorKind::SchemaError);
}
