#pragma once

// Monte-Carlo forecasting from ensemble statistics: modes stay at their
// ensemble mean, eigenvalues and amplitudes are drawn from independent
// Gaussians per real and imaginary component.

#include <cstdint>

#include "bopdmd/bop.hpp"

namespace bopdmd {

struct Forecast {
  Eigen::VectorXd times;
  Eigen::MatrixXcd mean;
  /// Sample variance of the real part of the draws.
  Eigen::MatrixXd variance;
  /// Sample variance of the imaginary part (zero for real-valued systems
  /// with exactly paired draws, nonzero otherwise).
  Eigen::MatrixXd variance_imag;
  int draws = 0;
};

/// Attempts allowed per requested draw before giving up on overflow.
inline constexpr int kForecastAttemptsPerDraw = 10;

DmdModel sample_model(const EnsembleStatistics& stats, Rng& rng);

/// `draws` independent realizations evaluated at `times`. Realizations whose
/// exponentials overflow are redrawn, up to 10 * draws attempts in total.
Forecast forecast(const EnsembleStatistics& stats, const Eigen::VectorXd& times, int draws,
                  std::uint64_t seed);

/// Fraction of entries with |Re(truth) - Re(mean)| <= n_sigma * sqrt(variance).
double coverage_fraction(const Forecast& fc, const Eigen::MatrixXcd& truth, double n_sigma);

}  // namespace bopdmd
