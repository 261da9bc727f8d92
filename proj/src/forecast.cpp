#include "bopdmd/forecast.hpp"

#include <cmath>
#include <string>

namespace bopdmd {

namespace {

cdouble draw_component(const cdouble& mean, double var_re, double var_im, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return {mean.real() + std::sqrt(var_re) * re, mean.imag() + std::sqrt(var_im) * im};
}

}  // namespace

DmdModel sample_model(const EnsembleStatistics& stats, Rng& rng) {
  const Eigen::Index r = stats.rank();
  DmdModel model{stats.mode_mean, Eigen::VectorXcd(r), Eigen::VectorXcd(r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    model.eigenvalues(j) = draw_component(stats.eigenvalue_mean(j), stats.eigenvalue_variance_real(j),
                                          stats.eigenvalue_variance_imag(j), rng);
  }
  for (Eigen::Index j = 0; j < r; ++j) {
    model.amplitudes(j) = draw_component(stats.amplitude_mean(j), stats.amplitude_variance_real(j),
                                         stats.amplitude_variance_imag(j), rng);
  }
  return model;
}

Forecast forecast(const EnsembleStatistics& stats, const Eigen::VectorXd& times, int draws,
                  std::uint64_t seed) {
  if (draws < 2) {
    throw Error(ErrorCode::InvalidArgument, "forecast needs at least two draws");
  }
  if (!times.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "forecast times must be finite");
  }
  const Eigen::Index n = stats.mode_mean.rows();
  const Eigen::Index steps = times.size();
  Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(n, steps);
  Eigen::MatrixXd sq_im = Eigen::MatrixXd::Zero(n, steps);
  std::vector<Eigen::MatrixXcd> paths;
  paths.reserve(static_cast<std::size_t>(draws));

  const int budget = kForecastAttemptsPerDraw * draws;
  int attempts = 0;
  for (int k = 0; k < draws; ++k) {
    Rng rng = derived_rng(seed, static_cast<std::uint64_t>(k));
    while (true) {
      if (++attempts > budget) {
        throw Error(ErrorCode::EigenvalueOverflow,
                    "exceeded " + std::to_string(budget) + " forecast draw attempts");
      }
      const DmdModel model = sample_model(stats, rng);
      try {
        const Eigen::MatrixXcd dynamics = time_dynamics_matrix(model.eigenvalues, times);
        Eigen::MatrixXcd path = model.modes * (model.amplitudes.asDiagonal() * dynamics);
        if (!path.allFinite()) {
          continue;
        }
        paths.push_back(std::move(path));
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EigenvalueOverflow) {
          throw;
        }
      }
    }
  }

  // Moments are taken about the first draw so identical draws give exactly
  // zero variance and a mean equal to that draw.
  const Eigen::MatrixXcd& pivot = paths.front();
  Eigen::MatrixXcd shift_sum = Eigen::MatrixXcd::Zero(n, steps);
  for (const Eigen::MatrixXcd& path : paths) {
    const Eigen::MatrixXcd d = path - pivot;
    shift_sum += d;
    sq_re.array() += d.real().array().square();
    sq_im.array() += d.imag().array().square();
  }
  const double k = static_cast<double>(draws);
  const Eigen::MatrixXcd shift_mean = shift_sum / k;

  Forecast fc;
  fc.times = times;
  fc.draws = draws;
  fc.mean = pivot + shift_mean;
  fc.variance = ((sq_re.array() - k * shift_mean.real().array().square()) / (k - 1.0)).max(0.0).matrix();
  fc.variance_imag = ((sq_im.array() - k * shift_mean.imag().array().square()) / (k - 1.0)).max(0.0).matrix();
  return fc;
}

double coverage_fraction(const Forecast& fc, const Eigen::MatrixXcd& truth, double n_sigma) {
  if (truth.rows() != fc.mean.rows() || truth.cols() != fc.mean.cols() ||
      fc.variance.rows() != fc.mean.rows() || fc.variance.cols() != fc.mean.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "truth and forecast shapes differ");
  }
  if (!(n_sigma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "n_sigma must be positive");
  }
  if (truth.size() == 0) {
    return 1.0;
  }
  const Eigen::ArrayXXd gap = (truth.real() - fc.mean.real()).array().abs();
  const Eigen::ArrayXXd band = n_sigma * fc.variance.array().sqrt();
  return static_cast<double>((gap <= band).count()) / static_cast<double>(truth.size());
}

}  // namespace bopdmd
