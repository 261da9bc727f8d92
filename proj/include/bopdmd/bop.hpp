#pragma once

// Bagging over optimized DMD: fit many optimized-DMD models on random column
// subsets, align them to a common mode ordering, and summarize the ensemble
// by elementwise means and variances of modes, eigenvalues and amplitudes.

#include <cstdint>
#include <optional>
#include <vector>

#include "bopdmd/core.hpp"
#include "bopdmd/random.hpp"
#include "bopdmd/varpro.hpp"

namespace bopdmd {

struct BagConfig {
  Eigen::Index bag_size = 20;  // p
  int trials = 100;            // K
  /// Extra draws allowed per trial after a rejected fit.
  int max_redraws = 5;
  /// Trials with max Re(omega) above this are rejected. Unset means
  /// 2 / (t_last - t_first) of the full data.
  std::optional<double> rejection_real_cap;
  std::uint64_t base_seed = 0;
  /// Seed every trial from the base model instead of the last accepted trial.
  bool freeze_seed = false;
  /// Worker threads; more than one implies freeze_seed.
  int threads = 1;
  /// Draw bag indices with replacement. Repeated indices collapse to one
  /// column since a snapshot matrix cannot hold duplicate sample times.
  bool with_replacement = false;

  void validate(Eigen::Index m, Eigen::Index rank) const;
};

struct EnsembleStatistics {
  Eigen::MatrixXcd mode_mean;
  Eigen::MatrixXd mode_variance_real;
  Eigen::MatrixXd mode_variance_imag;
  Eigen::VectorXcd eigenvalue_mean;
  Eigen::VectorXd eigenvalue_variance_real;
  Eigen::VectorXd eigenvalue_variance_imag;
  Eigen::VectorXcd amplitude_mean;
  Eigen::VectorXd amplitude_variance_real;
  Eigen::VectorXd amplitude_variance_imag;
  int accepted_trials = 0;
  int rejected_trials = 0;

  Eigen::Index rank() const noexcept { return eigenvalue_mean.size(); }

  /// Model made of the three means.
  DmdModel mean_model() const;
};

struct BopResult {
  EnsembleStatistics statistics;
  std::vector<DmdModel> models;
  /// Full-data optimized DMD that seeds and orders the ensemble.
  OptimizedFit base;
};

/// `bag_size` distinct indices from 0..m-1, sorted ascending.
std::vector<Eigen::Index> sample_bag(Eigen::Index m, Eigen::Index bag_size, Rng& rng,
                                     bool with_replacement = false);

/// Permutation of `model`'s columns minimizing sum |omega_model - omega_ref|.
std::vector<Eigen::Index> match_eigenvalues(const Eigen::VectorXcd& eigenvalues,
                                            const Eigen::VectorXcd& reference);

/// Reorders `model` so column j corresponds to the reference's column j.
DmdModel align_to_reference(const DmdModel& model, const DmdModel& reference);

/// Sample means and (K - 1)-divisor variances, per real and imaginary part.
EnsembleStatistics ensemble_statistics(const std::vector<DmdModel>& models);

BopResult bop_dmd(const SnapshotMatrix& data, Eigen::Index rank, const BagConfig& bag,
                  const SolverConfig& solver = {});

}  // namespace bopdmd
