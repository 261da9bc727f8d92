#pragma once

// Synthetic snapshot data with known eigenvalues.

#include <cstdint>
#include <vector>

#include "bopdmd/core.hpp"

namespace bopdmd {

/// f(x, t) = sin(x) e^{-2t} + cos(x) e^{it} + tanh(x) e^{t} + noise on an
/// equispaced (x, t) grid.
struct ToySpec {
  Eigen::Index n = 128;
  Eigen::Index m = 100;
  double sigma = 0.0;
  double x_min = 0.0;
  double x_max = 1.0;
  double t_min = 0.0;
  double t_max = 1.0;
  std::uint64_t seed = 0;
  /// Keep only the real part; e^{it} then becomes the pair e^{+-it}.
  bool real_part = false;
  /// Fraction of entries replaced by +-10 sigma spikes (sparse corruption).
  /// Not part of the reference noise model; off by default.
  double outlier_fraction = 0.0;
};

struct SyntheticDataset {
  SnapshotMatrix data;
  SnapshotMatrix truth;
  Eigen::VectorXcd true_omegas;
};

SyntheticDataset toy_dataset(const ToySpec& spec);

/// Real field on an nx-by-ny grid over [-1, 1]^2 built from Gaussian bumps.
/// Each nonzero frequency contributes psi e^{(decay + i freq) t} plus its
/// conjugate (rank 2); a zero frequency contributes one real mode e^{decay t}.
struct OscillatorSpec {
  Eigen::Index nx = 32;
  Eigen::Index ny = 16;
  Eigen::Index m = 200;
  double t_min = 0.0;
  double t_max = 20.0;
  std::vector<double> frequencies{1.0, 2.3};
  std::vector<double> decays{0.0, 0.0};
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

SyntheticDataset oscillator_surrogate(const OscillatorSpec& spec);

}  // namespace bopdmd
