#include "bopdmd/datagen.hpp"

#include <cmath>
#include <numbers>

#include "bopdmd/random.hpp"

namespace bopdmd {

namespace {

Eigen::VectorXd linspace(double lo, double hi, Eigen::Index count) {
  return Eigen::VectorXd::LinSpaced(count, lo, hi);
}

}  // namespace

SyntheticDataset toy_dataset(const ToySpec& spec) {
  if (spec.n < 2 || spec.m < 2 || !(spec.sigma >= 0.0) || spec.outlier_fraction < 0.0 ||
      spec.outlier_fraction > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "toy spec needs n, m >= 2, sigma >= 0, fraction in [0, 1]");
  }
  const Eigen::VectorXd x = linspace(spec.x_min, spec.x_max, spec.n);
  const Eigen::VectorXd t = linspace(spec.t_min, spec.t_max, spec.m);
  const cdouble i1(0.0, 1.0);

  Eigen::MatrixXcd truth(spec.n, spec.m);
  for (Eigen::Index k = 0; k < spec.m; ++k) {
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      truth(i, k) = std::sin(x(i)) * std::exp(-2.0 * t(k)) + std::cos(x(i)) * std::exp(i1 * t(k)) +
                    std::tanh(x(i)) * std::exp(t(k));
    }
  }
  if (spec.real_part) {
    truth = truth.real().cast<cdouble>();
  }

  Rng rng(mix_seed(spec.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd noisy = truth;
  if (spec.sigma > 0.0) {
    for (Eigen::Index k = 0; k < spec.m; ++k) {
      for (Eigen::Index i = 0; i < spec.n; ++i) {
        const double re = normal(rng);
        const double im = spec.real_part ? 0.0 : normal(rng);
        noisy(i, k) += spec.sigma * cdouble(re, im);
      }
    }
  }
  if (spec.outlier_fraction > 0.0) {
    std::bernoulli_distribution hit(spec.outlier_fraction);
    std::bernoulli_distribution sign(0.5);
    for (Eigen::Index k = 0; k < spec.m; ++k) {
      for (Eigen::Index i = 0; i < spec.n; ++i) {
        if (hit(rng)) {
          noisy(i, k) = truth(i, k) + (sign(rng) ? 10.0 : -10.0) * spec.sigma;
        }
      }
    }
  }

  Eigen::VectorXcd omegas;
  if (spec.real_part) {
    omegas.resize(4);
    omegas << -2.0, i1, -i1, 1.0;
  } else {
    omegas.resize(3);
    omegas << -2.0, i1, 1.0;
  }
  return {SnapshotMatrix(std::move(noisy), t), SnapshotMatrix(std::move(truth), t), omegas};
}

SyntheticDataset oscillator_surrogate(const OscillatorSpec& spec) {
  if (spec.frequencies.size() != spec.decays.size()) {
    throw Error(ErrorCode::InvalidArgument, "frequencies and decays must have equal length");
  }
  if (spec.nx < 1 || spec.ny < 1 || spec.m < 2 || !(spec.sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "oscillator spec needs nx, ny >= 1, m >= 2, sigma >= 0");
  }
  for (std::size_t j = 0; j < spec.frequencies.size(); ++j) {
    if (!std::isfinite(spec.frequencies[j]) || !std::isfinite(spec.decays[j])) {
      throw Error(ErrorCode::InvalidArgument, "frequencies and decays must be finite");
    }
  }
  const Eigen::Index n = spec.nx * spec.ny;
  const Eigen::VectorXd gx = linspace(-1.0, 1.0, spec.nx);
  const Eigen::VectorXd gy = linspace(-1.0, 1.0, spec.ny);
  const Eigen::VectorXd t = linspace(spec.t_min, spec.t_max, spec.m);
  const auto count = static_cast<Eigen::Index>(spec.frequencies.size());

  // Bump 2j is the real part of mode j, bump 2j + 1 the imaginary part; the
  // centers sit on a circle so distinct bumps stay linearly independent.
  auto bump = [&](Eigen::Index slot) {
    const double angle = std::numbers::pi * static_cast<double>(slot) / static_cast<double>(count);
    const double cx = 0.5 * std::cos(angle);
    const double cy = 0.5 * std::sin(angle);
    constexpr double width = 0.3;
    Eigen::VectorXd field(n);
    for (Eigen::Index iy = 0; iy < spec.ny; ++iy) {
      for (Eigen::Index ix = 0; ix < spec.nx; ++ix) {
        const double dx = gx(ix) - cx;
        const double dy = gy(iy) - cy;
        field(iy * spec.nx + ix) = std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
      }
    }
    return field;
  };

  Eigen::MatrixXcd truth = Eigen::MatrixXcd::Zero(n, spec.m);
  std::vector<cdouble> omegas;
  for (Eigen::Index j = 0; j < count; ++j) {
    const double freq = spec.frequencies[static_cast<std::size_t>(j)];
    const double decay = spec.decays[static_cast<std::size_t>(j)];
    const Eigen::VectorXd re_field = bump(2 * j);
    if (freq == 0.0) {
      for (Eigen::Index k = 0; k < spec.m; ++k) {
        truth.col(k) += (re_field * std::exp(decay * t(k))).cast<cdouble>();
      }
      omegas.emplace_back(decay, 0.0);
      continue;
    }
    const Eigen::VectorXd im_field = bump(2 * j + 1);
    const cdouble lambda(decay, freq);
    for (Eigen::Index k = 0; k < spec.m; ++k) {
      // psi e^{lambda t} + conj(psi) e^{conj(lambda) t} = 2 Re(psi e^{lambda t}).
      const cdouble e = std::exp(lambda * t(k));
      truth.col(k) += (2.0 * (re_field * e.real() - im_field * e.imag())).cast<cdouble>();
    }
    omegas.push_back(lambda);
    omegas.push_back(std::conj(lambda));
  }

  Eigen::MatrixXcd noisy = truth;
  if (spec.sigma > 0.0) {
    Rng rng(mix_seed(spec.seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < spec.m; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        noisy(i, k) += spec.sigma * normal(rng);
      }
    }
  }
  Eigen::VectorXcd true_omegas(static_cast<Eigen::Index>(omegas.size()));
  for (std::size_t j = 0; j < omegas.size(); ++j) {
    true_omegas(static_cast<Eigen::Index>(j)) = omegas[j];
  }
  return {SnapshotMatrix(std::move(noisy), t), SnapshotMatrix(std::move(truth), t), true_omegas};
}

}  // namespace bopdmd
