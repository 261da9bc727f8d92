#pragma once

// Snapshot containers, truncated SVD, and the exact (pseudo-inverse) DMD
// regression. Models are sums of spatial modes times complex exponentials:
//
//     x(t) = sum_j phi_j * b_j * exp(omega_j * t)
//
// Eigenvalues omega are continuous-time (units of 1/time) throughout.

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bopdmd/error.hpp"

namespace bopdmd {

using cdouble = std::complex<double>;

/// Snapshot matrix: rows are spatial locations, columns are samples in time.
class SnapshotMatrix {
 public:
  /// Validates n >= 1, m >= 2, strictly increasing times and finite values.
  SnapshotMatrix(Eigen::MatrixXcd values, Eigen::VectorXd times);

  const Eigen::MatrixXcd& values() const noexcept { return values_; }
  const Eigen::VectorXd& times() const noexcept { return times_; }
  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }
  double time_span() const noexcept { return times_(times_.size() - 1) - times_(0); }

  /// True when every entry has zero imaginary part.
  bool is_real() const;

  /// Sub-selection of columns (and their times); indices must be increasing.
  SnapshotMatrix select_columns(const std::vector<Eigen::Index>& indices) const;

 private:
  Eigen::MatrixXcd values_;
  Eigen::VectorXd times_;
};

/// Rank-r model: unit-norm modes, continuous-time eigenvalues and amplitudes.
struct DmdModel {
  Eigen::MatrixXcd modes;
  Eigen::VectorXcd eigenvalues;
  Eigen::VectorXcd amplitudes;

  Eigen::Index rank() const noexcept { return eigenvalues.size(); }
  Eigen::Index state_dim() const noexcept { return modes.rows(); }
};

struct DiscreteOperatorSpectrum {
  Eigen::VectorXcd discrete_eigenvalues;
  Eigen::MatrixXcd reduced_eigenvectors;
  Eigen::MatrixXcd pod_basis;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXcd right_vectors;
  /// 2-norm condition number of the reduced eigenvector matrix W.
  double eigenvector_condition = 1.0;
  /// sigma_r / sigma_1 fell below 1e-12.
  bool rank_deficient = false;
};

struct TruncatedSvd {
  Eigen::MatrixXcd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXcd v;
  bool rank_deficient = false;
};

struct AmplitudeFit {
  Eigen::VectorXcd values;
  bool rank_deficient = false;
};

inline constexpr double kUniformSpacingTolerance = 1e-8;
inline constexpr double kRankDeficiencyRatio = 1e-12;

/// Uniform sample spacing; throws NonUniformSampling if any spacing deviates
/// from the mean by more than 1e-8 relative.
double uniform_step(const Eigen::VectorXd& times);

/// X = columns 0..m-2, Xp = columns 1..m-1. Requires uniform sampling.
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> build_snapshot_pairs(const SnapshotMatrix& data);

TruncatedSvd truncated_svd(const Eigen::MatrixXcd& x, Eigen::Index rank);

/// Smallest rank whose singular values capture `energy` of the squared
/// Frobenius norm. Rank choice is left to callers; this only suggests one.
Eigen::Index suggest_rank(const Eigen::MatrixXcd& x, double energy = 0.9999);

/// Least-squares amplitudes b = pinv(modes) * x1.
AmplitudeFit amplitudes_from_first_snapshot(const Eigen::MatrixXcd& modes,
                                            const Eigen::VectorXcd& x1);

/// Exact DMD of uniformly sampled data. Omega = log(Lambda)/dt on the
/// principal branch, so frequencies above pi/dt alias.
std::pair<DmdModel, DiscreteOperatorSpectrum> exact_dmd(const SnapshotMatrix& data,
                                                        Eigen::Index rank);

/// Column k is modes * diag(b) * exp(omega * times[k]).
Eigen::MatrixXcd reconstruct(const DmdModel& model, const Eigen::VectorXd& times);

/// ||x - xhat||_F / ||x||_F.
double relative_error(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& xhat);

/// Splits Phi_b columns into unit-norm modes and amplitudes, rotating each
/// column so its largest-magnitude entry is real and non-negative.
void normalize_model(DmdModel& model);

/// Builds a normalized model from an unnormalized mode-times-amplitude block.
DmdModel model_from_scaled_modes(const Eigen::MatrixXcd& scaled_modes,
                                 const Eigen::VectorXcd& eigenvalues);

/// Moore-Penrose pseudo-inverse via SVD, zeroing singular values below
/// `relative_cutoff * sigma_max`.
Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& a, double relative_cutoff);

}  // namespace bopdmd
