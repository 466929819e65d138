#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "devo/features.hpp"
#include "devo/fft.hpp"
#include "devo/ingest.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace devo;

namespace {

std::shared_ptr<UniformSignal> random_signal(std::size_t channels, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto sig = std::make_shared<UniformSignal>();
  sig->rate = 200.0;
  sig->label = "z";
  for (std::size_t c = 0; c < channels; ++c) {
    sig->channel_names.push_back("ch" + std::to_string(c));
    sig->values.push_back(random_vector(samples, gen, -50.0, 50.0));
  }
  return sig;
}

double close(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Every feature of one window and channel list, computed directly from its
// definition, keyed by catalog name.
std::map<std::string, double> reference_row(const std::vector<std::vector<double>>& win,
                                            const std::vector<std::string>& names, std::size_t bins, double eps) {
  std::map<std::string, double> out;
  const std::size_t n = win[0].size(), q = n / 4;
  std::vector<double> qmin_all[4], qmax_all[4], qmean_all[4];
  std::vector<double> dmin_all[6], dmax_all[6], dmean_all[6];
  const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (std::size_t c = 0; c < win.size(); ++c) {
    const auto& x = win[c];
    const std::string& ch = names[c];
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
      m2 += std::pow(v - mean, 2);
      m3 += std::pow(v - mean, 3);
      m4 += std::pow(v - mean, 4);
    }
    m2 /= n, m3 /= n, m4 /= n;
    out["mean." + ch + ".0"] = mean;
    out["std." + ch + ".0"] = std::sqrt(m2);
    out["moments." + ch + ".0"] = m3 / std::pow(m2, 1.5);
    out["moments." + ch + ".1"] = m4 / (m2 * m2);

    auto lo = [&](std::size_t a, std::size_t b) { return *std::min_element(x.begin() + a, x.begin() + b); };
    auto hi = [&](std::size_t a, std::size_t b) { return *std::max_element(x.begin() + a, x.begin() + b); };
    const double mm[6] = {lo(0, n), hi(0, n), lo(0, n / 2), hi(0, n / 2), lo(n / 2, n), hi(n / 2, n)};
    for (int i = 0; i < 6; ++i) out["minmax." + ch + "." + std::to_string(i)] = mm[i];

    double qmin[4], qmax[4], qmean[4];
    for (int k = 0; k < 4; ++k) {
      qmin[k] = lo(k * q, (k + 1) * q);
      qmax[k] = hi(k * q, (k + 1) * q);
      double s = 0.0;
      for (std::size_t i = k * q; i < (k + 1) * q; ++i) s += x[i];
      qmean[k] = s / static_cast<double>(q);
      out["derivatives." + ch + "." + std::to_string(k)] = qmin[k];
      out["derivatives." + ch + "." + std::to_string(4 + k)] = qmax[k];
      out["derivatives." + ch + "." + std::to_string(8 + k)] = qmean[k];
      qmin_all[k].push_back(qmin[k]);
      qmax_all[k].push_back(qmax[k]);
      qmean_all[k].push_back(qmean[k]);
    }
    for (int p = 0; p < 6; ++p) {
      const double a = std::abs(qmin[pairs[p][0]] - qmin[pairs[p][1]]);
      const double b = std::abs(qmax[pairs[p][0]] - qmax[pairs[p][1]]);
      const double m = std::abs(qmean[pairs[p][0]] - qmean[pairs[p][1]]);
      out["distances." + ch + "." + std::to_string(p)] = a;
      out["distances." + ch + "." + std::to_string(6 + p)] = b;
      out["distances." + ch + "." + std::to_string(12 + p)] = m;
      dmin_all[p].push_back(a);
      dmax_all[p].push_back(b);
      dmean_all[p].push_back(m);
    }

    const double xmin = mm[0], xmax = mm[1];
    double total = 0.0;
    for (double v : x) total += (v - xmin) / (xmax - xmin);
    double h = 0.0;
    for (double v : x) {
      const double p = (v - xmin) / (xmax - xmin) / total;
      if (p > 0) h -= p * std::log(p);
    }
    out["shannon." + ch + ".0"] = h;
    double le = 0.0;
    for (double v : x) le += std::log(v * v + eps);
    out["logenergy." + ch + ".0"] = le;
    const auto dft = oracle::naive_dft(x);
    for (std::size_t k = 0; k < bins; ++k) out["fft." + ch + "." + std::to_string(k)] = std::abs(dft[k]);
  }
  std::vector<double> flat;
  for (auto* kind : {qmin_all, qmax_all, qmean_all})
    for (int k = 0; k < 4; ++k) flat.insert(flat.end(), kind[k].begin(), kind[k].end());
  for (auto* kind : {dmin_all, dmax_all, dmean_all})
    for (int p = 0; p < 6; ++p) flat.insert(flat.end(), kind[p].begin(), kind[p].end());
  flat.resize(150, 0.0);
  flat.resize(144);
  const auto lc = oracle::log_covariance(flat, eps);
  for (std::size_t i = 0; i < lc.size(); ++i) out["logcov.all." + std::to_string(i)] = lc[i];
  return out;
}

}  // namespace

TEST_CASE("window moments on small examples") {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = window_moments(x);
  CHECK(m.mean == 5.0);
  CHECK(m.stddev == doctest::Approx(2.0).epsilon(1e-14));
  // central moments 4, 5.25 and 44.5 by hand
  CHECK(m.skewness == doctest::Approx(5.25 / 8.0).epsilon(1e-12));
  CHECK(m.kurtosis == doctest::Approx(44.5 / 16.0).epsilon(1e-12));

  const auto flat = window_moments(std::vector<double>(16, 3.5));
  CHECK(flat.mean == 3.5);
  CHECK(flat.stddev == 0.0);
  CHECK(flat.skewness == 0.0);
  CHECK(flat.kurtosis == 0.0);

  const std::vector<double> sym{-3, -1, 1, 3};
  CHECK(std::abs(window_moments(sym).skewness) < 1e-15);
  CHECK_THROWS_KIND(window_moments(std::vector<double>{}), ErrorKind::ShapeError);
}

TEST_CASE("quarter statistics on a ramp") {
  std::vector<double> ramp(200);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  const auto q = quarter_derivatives(ramp);
  CHECK(q.min == 0.0);
  CHECK(q.max == 199.0);
  CHECK(q.half_max[0] == 99.0);
  CHECK(q.half_min[1] == 100.0);
  const double means[4] = {24.5, 74.5, 124.5, 174.5};
  for (int k = 0; k < 4; ++k) {
    CHECK(q.quarter_mean[k] == doctest::Approx(means[k]).epsilon(1e-14));
    CHECK(q.quarter_min[k] == 50.0 * k);
    CHECK(q.quarter_max[k] == 50.0 * k + 49.0);
  }
  // pair (0,3) is the fourth pair
  CHECK(q.dist_mean[2] == doctest::Approx(150.0).epsilon(1e-14));
  CHECK(q.dist_min[0] == 50.0);
  CHECK(q.dist_max[5] == 50.0);

  const auto c = quarter_derivatives(std::vector<double>(40, -2.0));
  for (double d : c.dist_mean) CHECK(d == 0.0);
  CHECK_THROWS_KIND(quarter_derivatives(std::vector<double>(10, 1.0)), ErrorKind::ShapeError);
}

TEST_CASE("quarter feature vector layout and padding") {
  std::vector<QuarterStats> chans(2);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 4; ++k) {
      chans[c].quarter_min[k] = 100 * c + k;
      chans[c].quarter_max[k] = 1000 + 100 * c + k;
    }
  const auto v = quarter_feature_vector(chans);
  REQUIRE(v.size() == 150);
  CHECK(v[0] == 0);    // min, quarter 0, channel 0
  CHECK(v[1] == 100);  // min, quarter 0, channel 1
  CHECK(v[2] == 1);    // min, quarter 1, channel 0
  CHECK(v[8] == 1000); // max, quarter 0, channel 0
  CHECK(v[60] == 0.0);
  CHECK(v[149] == 0.0);

  std::vector<QuarterStats> five(5);
  CHECK(quarter_feature_vector(five).size() == 150);
  std::vector<QuarterStats> six(6);
  CHECK(quarter_feature_vector(six).size() == 180);
}

TEST_CASE("log covariance agrees with a Jacobi eigen oracle") {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(150, gen, -10.0, 10.0);
    const std::vector<double> head(x.begin(), x.begin() + 144);
    // a ridge of 1e-2 keeps every eigenvalue well away from rounding noise
    const auto lc = log_covariance(x, 1e-2);
    REQUIRE(lc.upper.size() == 78);
    CHECK(lc.sanitized == 0);
    const auto ref = oracle::log_covariance(head, 1e-2);
    for (std::size_t i = 0; i < 78; ++i) CHECK(std::abs(lc.upper[i] - ref[i]) < 1e-9);

    // Twelve centred observations span at most 11 dimensions, so one
    // eigenvalue sits at eps = 1e-8 and carries absolute rounding error of
    // about 1e-16 * |cov| ~ 1e-14: a relative error near 1e-6 before the log.
    const auto tight = log_covariance(x, 1e-8);
    const auto tight_ref = oracle::log_covariance(head, 1e-8);
    for (std::size_t i = 0; i < 78; ++i)
      CHECK(std::abs(tight.upper[i] - tight_ref[i]) < 1e-4 * std::max(1.0, std::abs(tight_ref[i])));
  }
}

TEST_CASE("log covariance of a degenerate input is log(eps) on the diagonal") {
  const auto lc = log_covariance(std::vector<double>(150, 7.0), 1e-8);
  std::size_t idx = 0;
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = r; c < 12; ++c, ++idx) {
      if (r == c)
        CHECK(lc.upper[idx] == doctest::Approx(std::log(1e-8)).epsilon(1e-12));
      else
        CHECK(std::abs(lc.upper[idx]) < 1e-12);
    }

  std::vector<double> nan(150, 1.0);
  nan[3] = std::nan("");
  const auto s = log_covariance(nan, 1e-8);
  CHECK(s.sanitized == 1);
  for (double v : s.upper) CHECK(std::isfinite(v));
  CHECK_THROWS_KIND(log_covariance(std::vector<double>(100, 0.0)), ErrorKind::ShapeError);
}

TEST_CASE("shannon entropy examples") {
  // constant window counts as uniform
  CHECK(shannon_entropy(std::vector<double>(8, 5.0)) == doctest::Approx(std::log(8.0)));
  // normalised to {0, 1}: all mass on one sample
  CHECK(shannon_entropy(std::vector<double>{3.0, 9.0}) == 0.0);
  // {0, 0.5, 1} -> p = {0, 1/3, 2/3}
  const double h = -(1.0 / 3) * std::log(1.0 / 3) - (2.0 / 3) * std::log(2.0 / 3);
  CHECK(shannon_entropy(std::vector<double>{-1.0, 0.0, 1.0}) == doctest::Approx(h).epsilon(1e-14));
  std::mt19937_64 gen(3);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_vector(64, gen);
    const double e = shannon_entropy(x);
    CHECK(e >= 0.0);
    CHECK(e <= std::log(64.0) + 1e-12);
  }
}

TEST_CASE("log energy entropy sums both halves") {
  const std::vector<double> x{1.0, 2.0, 0.0, 3.0};
  const double eps = 1e-8;
  const double expected = std::log(1 + eps) + std::log(4 + eps) + std::log(eps) + std::log(9 + eps);
  CHECK(log_energy_entropy(x, eps) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_KIND(log_energy_entropy(std::vector<double>{1, 2, 3}), ErrorKind::ShapeError);
}

TEST_CASE("fft features: impulse and constant") {
  std::vector<double> impulse(64, 0.0);
  impulse[0] = 1.0;
  for (double m : fft_features(impulse, 33)) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
  const auto c = fft_features(std::vector<double>(50, 2.0), 26);
  CHECK(c[0] == doctest::Approx(100.0).epsilon(1e-14));
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-10);
  CHECK_THROWS_KIND(fft_features(std::vector<double>(10, 0.0), 7), ErrorKind::ConfigError);
}

TEST_CASE("fft matches a naive DFT for every length up to 256") {
  std::mt19937_64 gen(12);
  for (std::size_t n = 1; n <= 256; ++n) {
    const auto x = random_vector(n, gen);
    const auto ref = oracle::naive_dft(x);
    const auto got = fft::transform_real(x);
    REQUIRE(got.size() == n);
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(got[k] - ref[k]));
    CHECK_MESSAGE(worst < 1e-9 * std::max<double>(1.0, n), "n = " << n);
  }
}

TEST_CASE("inverse fft undoes the forward transform") {
  std::mt19937_64 gen(8);
  for (std::size_t n : {3u, 17u, 64u, 100u, 200u}) {
    std::vector<fft::Complex> x(n);
    for (auto& v : x) v = {std::uniform_real_distribution<>(-1, 1)(gen), std::uniform_real_distribution<>(-1, 1)(gen)};
    const auto back = fft::transform(fft::transform(x), true);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(back[i] / static_cast<double>(n) - x[i]) < 1e-12);
  }
}

TEST_CASE("catalog width for all groups over four channels") {
  const std::vector<std::string> ch{"TP9", "FP1", "FP2", "TP10"};
  const auto cat = feature_catalog(FeatureConfig::all(), ch);
  CHECK(cat.size() == 446);
  CHECK(cat.front().name == "mean.TP9.0");
  std::size_t logcov = 0;
  for (const auto& e : cat) logcov += e.group == FeatureGroup::LogCov;
  CHECK(logcov == 78);
  CHECK(feature_catalog(FeatureConfig::none(), ch).empty());
}

TEST_CASE("extract with no groups gives empty rows") {
  const auto sig = random_signal(4, 600, 1);
  const auto w = make_windows(sig, 1.0, 0.5);
  const auto d = extract(w, FeatureConfig::none());
  CHECK(d.cols() == 0);
  CHECK(d.rows() == 5);
  CHECK(d.class_names == std::vector<std::string>{"z"});
}

TEST_CASE("extract on a constant signal") {
  auto sig = std::make_shared<UniformSignal>();
  sig->rate = 200.0;
  sig->channel_names = {"a", "b"};
  sig->values = {std::vector<double>(400, 1.5), std::vector<double>(400, 1.5)};
  ExtractStats stats;
  const auto d = extract(make_windows(sig, 1.0, 0.5), FeatureConfig::all(), &stats);
  CHECK(stats.sanitized == 0);
  for (std::size_t c = 0; c < d.cols(); ++c) {
    const auto& name = d.feature_names[c];
    const double v = d.at(0, c);
    if (name.starts_with("std.") || name.starts_with("moments.") || name.starts_with("distances."))
      CHECK_MESSAGE(v == 0.0, name);
    if (name.starts_with("fft.") && !name.ends_with(".0")) CHECK_MESSAGE(std::abs(v) < 1e-9, name);
  }
}

TEST_CASE("extract agrees with features computed from their definitions") {
  const auto sig = random_signal(4, 700, 21);
  auto cfg = FeatureConfig::all();
  const auto w = make_windows(sig, 1.0, 0.5);
  const auto d = extract(w, cfg);
  REQUIRE(d.cols() == 446);
  REQUIRE(d.rows() == w.windows.size());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    std::vector<std::vector<double>> win;
    for (std::size_t c = 0; c < 4; ++c) {
      const auto s = w.slice(r, c);
      win.emplace_back(s.begin(), s.end());
    }
    const auto ref = reference_row(win, sig->channel_names, cfg.fft_bins_kept, cfg.epsilon);
    REQUIRE(ref.size() == 446);
    for (std::size_t c = 0; c < d.cols(); ++c) {
      const auto it = ref.find(d.feature_names[c]);
      REQUIRE_MESSAGE(it != ref.end(), d.feature_names[c]);
      // logcov inherits the near-singular conditioning described above
      const double tol = d.feature_names[c].starts_with("logcov") ? 1e-4 : 1e-9;
      CHECK_MESSAGE(close(d.at(r, c), it->second) < tol, d.feature_names[c]);
    }
  }
}

TEST_CASE("extract is deterministic across thread counts and NaN free") {
  const auto sig = random_signal(4, 2000, 5);
  const auto w = make_windows(sig, 1.0, 0.5);
  auto cfg = FeatureConfig::all();
  cfg.threads = 1;
  const auto one = extract(w, cfg);
  cfg.threads = 4;
  const auto four = extract(w, cfg);
  CHECK(one.values == four.values);
  for (double v : one.values) CHECK(std::isfinite(v));
  CHECK(one.feature_names == four.feature_names);
}

TEST_CASE("extract rejects window lengths the groups cannot use") {
  auto sig = random_signal(1, 1000, 2);
  sig->rate = 201.0;  // 201-sample windows
  const auto w = make_windows(sig, 1.0, 0.5);
  CHECK_THROWS_KIND(extract(w, FeatureConfig::all()), ErrorKind::ShapeError);
  auto cfg = FeatureConfig::none();
  cfg.set(FeatureGroup::Mean, true);
  CHECK(extract(w, cfg).cols() == 1);
}
