#include "doctest.h"

#include <cmath>
#include <random>

#include "bopdmd/datagen.hpp"
#include "bopdmd/forecast.hpp"
#include "test_support.hpp"

using namespace bopdmd;

namespace {

EnsembleStatistics zero_variance_stats(const DmdModel& model) {
  const Eigen::Index n = model.state_dim();
  const Eigen::Index r = model.rank();
  EnsembleStatistics s;
  s.mode_mean = model.modes;
  s.mode_variance_real = Eigen::MatrixXd::Zero(n, r);
  s.mode_variance_imag = Eigen::MatrixXd::Zero(n, r);
  s.eigenvalue_mean = model.eigenvalues;
  s.eigenvalue_variance_real = Eigen::VectorXd::Zero(r);
  s.eigenvalue_variance_imag = Eigen::VectorXd::Zero(r);
  s.amplitude_mean = model.amplitudes;
  s.amplitude_variance_real = Eigen::VectorXd::Zero(r);
  s.amplitude_variance_imag = Eigen::VectorXd::Zero(r);
  s.accepted_trials = 2;
  return s;
}

DmdModel random_model(Eigen::Index n, Eigen::Index r, std::mt19937_64& rng) {
  DmdModel m;
  m.modes = testing::random_complex(n, r, rng);
  for (Eigen::Index j = 0; j < r; ++j) {
    m.modes.col(j).normalize();
  }
  m.eigenvalues = 0.3 * testing::random_complex(r, 1, rng);
  m.amplitudes = testing::random_complex(r, 1, rng);
  return m;
}

// Scalar model x(t) = e^{omega t} with omega = a + ic, a ~ N(mu, va), c ~ N(0, vc):
// E[Re x] = E[e^{at}] E[cos ct], Var via E[e^{2at}] E[cos^2 ct].
struct ScalarMoments {
  double mean;
  double variance;
};

ScalarMoments scalar_moments(double mu, double va, double vc, double t) {
  const double e1 = std::exp(mu * t + 0.5 * va * t * t);
  const double e2 = std::exp(2.0 * mu * t + 2.0 * va * t * t);
  const double c1 = std::exp(-0.5 * vc * t * t);
  const double c2 = 0.5 * (1.0 + std::exp(-2.0 * vc * t * t));
  return {e1 * c1, e2 * c2 - e1 * e1 * c1 * c1};
}

}  // namespace

TEST_CASE("zero variances collapse to the mean model") {
  std::mt19937_64 rng(3);
  const DmdModel model = random_model(6, 3, rng);
  const EnsembleStatistics stats = zero_variance_stats(model);
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(15, 0.0, 3.0);
  const Forecast fc = forecast(stats, times, 25, 9);
  CHECK(fc.draws == 25);
  CHECK((fc.times - times).norm() == 0.0);
  CHECK((fc.mean - reconstruct(model, times)).norm() <= 1e-12 * fc.mean.norm());
  CHECK(fc.variance.maxCoeff() == 0.0);
  CHECK(fc.variance_imag.maxCoeff() == 0.0);
}

TEST_CASE("forecasting at training times reproduces the reconstruction") {
  const SyntheticDataset ds = toy_dataset({.n = 40, .m = 50});
  const DmdModel model = exact_dmd(ds.data, 3).first;
  const Forecast fc = forecast(zero_variance_stats(model), ds.data.times(), 4, 1);
  const Eigen::MatrixXcd recon = reconstruct(model, ds.data.times());
  CHECK((fc.mean - recon).cwiseAbs().maxCoeff() <= 1e-12 * recon.cwiseAbs().maxCoeff());
}

TEST_CASE("scalar draws match closed-form moments") {
  EnsembleStatistics s = zero_variance_stats(
      DmdModel{Eigen::MatrixXcd::Ones(1, 1), Eigen::VectorXcd::Constant(1, cdouble(-0.5, 0.0)),
               Eigen::VectorXcd::Ones(1)});
  s.eigenvalue_variance_real(0) = 0.01;
  s.eigenvalue_variance_imag(0) = 0.04;
  const Eigen::VectorXd times = Eigen::Vector3d(0.5, 1.0, 2.0);
  const Forecast fc = forecast(s, times, 10000, 77);
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    const ScalarMoments exact = scalar_moments(-0.5, 0.01, 0.04, times(k));
    CHECK(fc.mean(0, k).real() == doctest::Approx(exact.mean).epsilon(0.01));
    CHECK(fc.variance(0, k) == doctest::Approx(exact.variance).epsilon(0.1));
  }
}

TEST_CASE("amplitude variance propagates linearly") {
  // With fixed omega = 0 and a unit mode, Re x = Re b, so the forecast
  // variance equals the amplitude variance.
  EnsembleStatistics s = zero_variance_stats(DmdModel{
      Eigen::MatrixXcd::Ones(1, 1), Eigen::VectorXcd::Zero(1), Eigen::VectorXcd::Constant(1, 2.0)});
  s.amplitude_variance_real(0) = 0.25;
  s.amplitude_variance_imag(0) = 0.09;
  const Forecast fc = forecast(s, Eigen::VectorXd::LinSpaced(3, 0.0, 1.0), 10000, 5);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(fc.variance(0, k) == doctest::Approx(0.25).epsilon(0.05));
    CHECK(fc.variance_imag(0, k) == doctest::Approx(0.09).epsilon(0.05));
    CHECK(fc.mean(0, k).real() == doctest::Approx(2.0).epsilon(0.01));
  }
}

TEST_CASE("forecasts are deterministic in the seed") {
  std::mt19937_64 rng(8);
  EnsembleStatistics s = zero_variance_stats(random_model(5, 2, rng));
  s.eigenvalue_variance_real.setConstant(0.01);
  s.amplitude_variance_imag.setConstant(0.02);
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(7, 0.0, 2.0);
  const Forecast a = forecast(s, times, 30, 123);
  const Forecast b = forecast(s, times, 30, 123);
  const Forecast c = forecast(s, times, 30, 124);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
  CHECK(a.variance_imag == b.variance_imag);
  CHECK(a.mean != c.mean);
}

TEST_CASE("Monte-Carlo error of the mean shrinks like 1/K") {
  std::mt19937_64 rng(21);
  EnsembleStatistics s = zero_variance_stats(random_model(4, 2, rng));
  s.eigenvalue_variance_real.setConstant(0.02);
  s.eigenvalue_variance_imag.setConstant(0.02);
  s.amplitude_variance_real.setConstant(0.05);
  s.amplitude_variance_imag.setConstant(0.05);
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);

  auto spread = [&](int draws, std::uint64_t offset) {
    constexpr int repeats = 20;
    std::vector<Eigen::MatrixXcd> means;
    Eigen::MatrixXcd avg = Eigen::MatrixXcd::Zero(4, times.size());
    for (int k = 0; k < repeats; ++k) {
      means.push_back(forecast(s, times, draws, offset + static_cast<std::uint64_t>(k)).mean);
      avg += means.back();
    }
    avg /= repeats;
    double total = 0.0;
    for (const auto& m : means) {
      total += (m - avg).real().squaredNorm();
    }
    return total / (repeats - 1);
  };
  const double ratio = spread(100, 1000) / spread(400, 5000);
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 8.0);
}

TEST_CASE("overflowing draws exhaust the attempt budget") {
  EnsembleStatistics s = zero_variance_stats(DmdModel{
      Eigen::MatrixXcd::Ones(1, 1), Eigen::VectorXcd::Constant(1, 800.0), Eigen::VectorXcd::Ones(1)});
  try {
    forecast(s, Eigen::Vector2d(0.0, 1.0), 3, 0);
    FAIL("expected EigenvalueOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EigenvalueOverflow);
  }
}

TEST_CASE("occasional overflow is redrawn") {
  // Re(omega) ~ N(0, 400^2): about 4% of draws exceed the overflow limit at t = 1.
  EnsembleStatistics s = zero_variance_stats(DmdModel{
      Eigen::MatrixXcd::Ones(1, 1), Eigen::VectorXcd::Zero(1), Eigen::VectorXcd::Ones(1)});
  s.eigenvalue_variance_real(0) = 400.0 * 400.0;
  const Forecast fc = forecast(s, Eigen::Vector2d(0.0, 1.0), 200, 4);
  CHECK(fc.mean.allFinite());
  CHECK(fc.variance(0, 0) == 0.0);
}

TEST_CASE("forecast argument checks") {
  const EnsembleStatistics s = zero_variance_stats(DmdModel{
      Eigen::MatrixXcd::Ones(1, 1), Eigen::VectorXcd::Zero(1), Eigen::VectorXcd::Ones(1)});
  CHECK_THROWS_AS(forecast(s, Eigen::Vector2d(0.0, 1.0), 1, 0), Error);
  CHECK_THROWS_AS(forecast(s, Eigen::Vector2d(0.0, std::nan("")), 5, 0), Error);
}

TEST_CASE("coverage fraction") {
  Forecast fc;
  fc.mean = Eigen::MatrixXcd::Zero(2, 3);
  fc.variance = Eigen::MatrixXd::Zero(2, 3);
  fc.variance_imag = Eigen::MatrixXd::Zero(2, 3);

  SUBCASE("truth equal to the mean is covered") {
    CHECK(coverage_fraction(fc, fc.mean, 3.0) == 1.0);
  }
  SUBCASE("zero variance covers nothing off the mean") {
    CHECK(coverage_fraction(fc, Eigen::MatrixXcd::Constant(2, 3, 1e-9), 3.0) == 0.0);
  }
  SUBCASE("hand count") {
    fc.variance.setOnes();
    Eigen::MatrixXcd truth(2, 3);
    truth << 0.5, 2.5, -1.9, 3.0, 0.0, cdouble(1.0, 50.0);
    // Band is |Re| <= 2: four of six entries.
    CHECK(coverage_fraction(fc, truth, 2.0) == doctest::Approx(4.0 / 6.0));
  }
  SUBCASE("Gaussian truth at two sigma") {
    const Eigen::Index n = 100;
    const Eigen::Index m = 200;
    Forecast g;
    g.mean = Eigen::MatrixXcd::Zero(n, m);
    g.variance = Eigen::MatrixXd::Constant(n, m, 4.0);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal(0.0, 2.0);
    Eigen::MatrixXcd truth(n, m);
    for (Eigen::Index k = 0; k < truth.size(); ++k) {
      truth.data()[k] = normal(rng);
    }
    CHECK(coverage_fraction(g, truth, 2.0) == doctest::Approx(0.9545).epsilon(0.02));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(coverage_fraction(fc, Eigen::MatrixXcd::Zero(3, 2), 3.0), Error);
    CHECK_THROWS_AS(coverage_fraction(fc, fc.mean, 0.0), Error);
  }
}

TEST_CASE("noise-free toy pipeline extends the analytic solution") {
  const SyntheticDataset ds = toy_dataset({.n = 128, .m = 100});
  const BopResult bop = bop_dmd(ds.data, 3, BagConfig{.bag_size = 20, .trials = 10, .base_seed = 1});
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(51, 1.0, 2.0);
  const Forecast fc = forecast(bop.statistics, times, 20, 3);

  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(128, 0.0, 1.0);
  Eigen::MatrixXcd truth(128, times.size());
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    for (Eigen::Index i = 0; i < 128; ++i) {
      truth(i, k) = std::sin(x(i)) * std::exp(-2.0 * times(k)) +
                    std::cos(x(i)) * std::exp(cdouble(0.0, times(k))) + std::tanh(x(i)) * std::exp(times(k));
    }
  }
  CHECK(relative_error(truth, fc.mean) <= 1e-4);
}

TEST_CASE("noisy toy forecast keeps the truth inside the band") {
  const SyntheticDataset ds = toy_dataset({.n = 128, .m = 100, .sigma = 0.005, .seed = 17});
  const BopResult bop = bop_dmd(ds.data, 3, BagConfig{.bag_size = 20, .trials = 100, .base_seed = 2});
  const SyntheticDataset ahead = toy_dataset({.n = 128, .m = 51, .t_min = 1.0, .t_max = 1.5});
  const Forecast fc = forecast(bop.statistics, ahead.truth.times(), 100, 6);
  const double coverage = coverage_fraction(fc, ahead.truth.values(), 3.0);
  MESSAGE("toy 3-sigma coverage on [1, 1.5]: " << coverage);
  CHECK(coverage >= 0.9);
}
