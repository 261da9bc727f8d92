#include "bopdmd/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bopdmd {

SnapshotMatrix::SnapshotMatrix(Eigen::MatrixXcd values, Eigen::VectorXd times)
    : values_(std::move(values)), times_(std::move(times)) {
  if (values_.rows() < 1 || values_.cols() < 2) {
    throw Error(ErrorCode::InvalidArgument, "snapshot matrix needs n >= 1 rows and m >= 2 columns");
  }
  if (times_.size() != values_.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(values_.cols()) +
                                              " sample times, got " + std::to_string(times_.size()));
  }
  for (Eigen::Index k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_(k))) {
      throw Error(ErrorCode::InvalidArgument, "sample time " + std::to_string(k) + " is not finite");
    }
    if (k > 0 && !(times_(k) > times_(k - 1))) {
      throw Error(ErrorCode::NonIncreasingTimes,
                  "sample times must be strictly increasing (index " + std::to_string(k) + ")");
    }
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "snapshot values must be finite");
  }
}

bool SnapshotMatrix::is_real() const {
  return (values_.imag().array() == 0.0).all();
}

SnapshotMatrix SnapshotMatrix::select_columns(const std::vector<Eigen::Index>& indices) const {
  Eigen::MatrixXcd v(values_.rows(), static_cast<Eigen::Index>(indices.size()));
  Eigen::VectorXd t(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Eigen::Index c = indices[k];
    if (c < 0 || c >= values_.cols()) {
      throw Error(ErrorCode::InvalidArgument, "column index out of range");
    }
    v.col(static_cast<Eigen::Index>(k)) = values_.col(c);
    t(static_cast<Eigen::Index>(k)) = times_(c);
  }
  return SnapshotMatrix(std::move(v), std::move(t));
}

double uniform_step(const Eigen::VectorXd& times) {
  const Eigen::Index m = times.size();
  if (m < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least two sample times");
  }
  const double dt = (times(m - 1) - times(0)) / static_cast<double>(m - 1);
  for (Eigen::Index k = 1; k < m; ++k) {
    const double step = times(k) - times(k - 1);
    if (std::abs(step - dt) > kUniformSpacingTolerance * std::abs(dt)) {
      throw Error(ErrorCode::NonUniformSampling,
                  "sample spacing at index " + std::to_string(k) + " is " + std::to_string(step) +
                      ", expected " + std::to_string(dt));
    }
  }
  return dt;
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> build_snapshot_pairs(const SnapshotMatrix& data) {
  uniform_step(data.times());
  const Eigen::Index m = data.cols();
  return {data.values().leftCols(m - 1), data.values().rightCols(m - 1)};
}

TruncatedSvd truncated_svd(const Eigen::MatrixXcd& x, Eigen::Index rank) {
  const Eigen::Index max_rank = std::min(x.rows(), x.cols());
  if (rank < 1) {
    throw Error(ErrorCode::InvalidRank, "rank must be at least 1");
  }
  if (rank > max_rank) {
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(rank) + " exceeds min(n, m) = " +
                                             std::to_string(max_rank));
  }
  if (!x.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "matrix has non-finite entries");
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = svd.matrixU().leftCols(rank);
  out.sigma = svd.singularValues().head(rank);
  out.v = svd.matrixV().leftCols(rank);
  const double s1 = out.sigma(0);
  out.rank_deficient = !(s1 > 0.0) || out.sigma(rank - 1) / s1 < kRankDeficiencyRatio;
  return out;
}

Eigen::Index suggest_rank(const Eigen::MatrixXcd& x, double energy) {
  const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXcd>(x).singularValues();
  const double total = s.squaredNorm();
  if (total == 0.0) {
    return 1;
  }
  double running = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    running += s(k) * s(k);
    if (running >= energy * total) {
      return k + 1;
    }
  }
  return s.size();
}

Eigen::MatrixXcd pseudo_inverse(const Eigen::MatrixXcd& a, double relative_cutoff) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? relative_cutoff * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff && s(k) > 0.0) {
      inv(k) = 1.0 / s(k);
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

AmplitudeFit amplitudes_from_first_snapshot(const Eigen::MatrixXcd& modes,
                                            const Eigen::VectorXcd& x1) {
  if (modes.rows() != x1.size()) {
    throw Error(ErrorCode::ShapeMismatch, "mode rows and snapshot length differ");
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(modes, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  AmplitudeFit fit;
  const double cutoff = s.size() > 0 ? kRankDeficiencyRatio * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff && s(k) > 0.0) {
      inv(k) = 1.0 / s(k);
    } else {
      fit.rank_deficient = true;
    }
  }
  // Fewer rows than modes also leaves the fit underdetermined.
  if (s.size() < modes.cols()) {
    fit.rank_deficient = true;
  }
  fit.values = svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().adjoint() * x1));
  return fit;
}

namespace {

// First index whose magnitude is within a relative 1e-12 of the column
// maximum; the slack keeps the choice stable under unit-phase rotation.
Eigen::Index phase_anchor(const Eigen::VectorXcd& column) {
  const Eigen::VectorXd mags = column.cwiseAbs();
  const double peak = mags.maxCoeff();
  for (Eigen::Index i = 0; i < mags.size(); ++i) {
    if (mags(i) >= peak * (1.0 - 1e-12)) {
      return i;
    }
  }
  return 0;
}

}  // namespace

void normalize_model(DmdModel& model) {
  for (Eigen::Index j = 0; j < model.modes.cols(); ++j) {
    auto column = model.modes.col(j);
    const double norm = column.norm();
    if (!(norm > 0.0)) {
      column.setZero();
      column(0) = 1.0;
      model.amplitudes(j) = 0.0;
      continue;
    }
    column /= norm;
    model.amplitudes(j) *= norm;
    const cdouble anchor = column(phase_anchor(column));
    const double mag = std::abs(anchor);
    if (mag > 0.0) {
      const cdouble phase = anchor / mag;
      column *= std::conj(phase);
      model.amplitudes(j) *= phase;
    }
    // Pin the anchor exactly so renormalizing is a no-op.
    const Eigen::Index a = phase_anchor(column);
    column(a) = cdouble(std::abs(column(a)), 0.0);
  }
}

DmdModel model_from_scaled_modes(const Eigen::MatrixXcd& scaled_modes,
                                 const Eigen::VectorXcd& eigenvalues) {
  DmdModel model{scaled_modes, eigenvalues, Eigen::VectorXcd::Ones(eigenvalues.size())};
  normalize_model(model);
  return model;
}

std::pair<DmdModel, DiscreteOperatorSpectrum> exact_dmd(const SnapshotMatrix& data,
                                                        Eigen::Index rank) {
  const double dt = uniform_step(data.times());
  const auto [x, xp] = build_snapshot_pairs(data);
  if (rank < 1) {
    throw Error(ErrorCode::InvalidRank, "rank must be at least 1");
  }
  if (rank > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::RankTooLarge,
                "rank " + std::to_string(rank) + " exceeds min(n, m - 1) = " +
                    std::to_string(std::min(x.rows(), x.cols())));
  }

  TruncatedSvd svd = truncated_svd(x, rank);
  if (!(svd.sigma(rank - 1) > 0.0)) {
    throw Error(ErrorCode::DegenerateEigenproblem, "zero singular value within requested rank");
  }
  const Eigen::VectorXd sigma_inv = svd.sigma.cwiseInverse();
  const Eigen::MatrixXcd xp_v_sinv = xp * svd.v * sigma_inv.asDiagonal();
  const Eigen::MatrixXcd a_tilde = svd.u.adjoint() * xp_v_sinv;

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(a_tilde, true);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::DegenerateEigenproblem, "reduced operator eigendecomposition failed");
  }
  const Eigen::VectorXcd lambda = eig.eigenvalues();
  const Eigen::MatrixXcd w = eig.eigenvectors();

  Eigen::VectorXcd omega(rank);
  for (Eigen::Index j = 0; j < rank; ++j) {
    omega(j) = std::log(lambda(j)) / dt;
  }
  if (!omega.allFinite()) {
    throw Error(ErrorCode::DegenerateEigenproblem, "zero or non-finite discrete eigenvalue");
  }

  DmdModel model;
  model.modes = xp_v_sinv * w;
  model.eigenvalues = omega;
  const AmplitudeFit amps = amplitudes_from_first_snapshot(model.modes, data.values().col(0));
  model.amplitudes = amps.values;
  // Amplitudes are referenced to t = 0, not to the first sample time.
  const double t0 = data.times()(0);
  for (Eigen::Index j = 0; j < rank; ++j) {
    model.amplitudes(j) *= std::exp(-omega(j) * t0);
  }
  normalize_model(model);

  DiscreteOperatorSpectrum spectrum;
  spectrum.discrete_eigenvalues = lambda;
  spectrum.reduced_eigenvectors = w;
  spectrum.pod_basis = std::move(svd.u);
  spectrum.singular_values = std::move(svd.sigma);
  spectrum.right_vectors = std::move(svd.v);
  spectrum.rank_deficient = svd.rank_deficient || amps.rank_deficient;
  const Eigen::VectorXd ws = Eigen::JacobiSVD<Eigen::MatrixXcd>(w).singularValues();
  spectrum.eigenvector_condition =
      ws(ws.size() - 1) > 0.0 ? ws(0) / ws(ws.size() - 1) : std::numeric_limits<double>::infinity();
  return {std::move(model), std::move(spectrum)};
}

Eigen::MatrixXcd reconstruct(const DmdModel& model, const Eigen::VectorXd& times) {
  if (!times.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "reconstruction times must be finite");
  }
  if (model.modes.cols() != model.rank() || model.amplitudes.size() != model.rank()) {
    throw Error(ErrorCode::ShapeMismatch, "inconsistent model shapes");
  }
  Eigen::MatrixXcd dynamics(model.rank(), times.size());
  for (Eigen::Index j = 0; j < model.rank(); ++j) {
    for (Eigen::Index k = 0; k < times.size(); ++k) {
      dynamics(j, k) = model.amplitudes(j) * std::exp(model.eigenvalues(j) * times(k));
    }
  }
  return model.modes * dynamics;
}

double relative_error(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& xhat) {
  if (x.rows() != xhat.rows() || x.cols() != xhat.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "relative_error shapes differ");
  }
  const double ref = x.norm();
  if (ref == 0.0) {
    throw Error(ErrorCode::ZeroReference, "reference matrix has zero norm");
  }
  return (x - xhat).norm() / ref;
}

}  // namespace bopdmd
