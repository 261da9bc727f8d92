#pragma once

// Optimized DMD: minimize ||X - Phi_b T(omega)||_F over omega and Phi_b by
// variable projection. For fixed omega the best Phi_b is X pinv(T), which
// leaves a nonlinear least-squares problem in omega alone; that problem is
// solved with Levenberg-Marquardt over the 2r real coordinates
// (Re omega, Im omega).

#include <optional>
#include <string_view>
#include <vector>

#include "bopdmd/core.hpp"

namespace bopdmd {

struct SolverConfig {
  int max_iterations = 200;
  /// Stop when max_k |J_k^T r| / (||J_k|| ||r||) falls below this.
  double gradient_tolerance = 1e-8;
  /// Stop when ||step|| <= tol * (||theta|| + tol).
  double step_tolerance = 1e-10;
  /// Stop when ||residual||_F / ||X||_F falls below this.
  double residual_tolerance = 1e-12;
  double marquardt_lambda_init = 1e-2;
  double marquardt_scale = 2.0;
  double pinv_threshold = 1e-12;
  /// Upper bound on Re(omega) for a converged fit. Unset means
  /// 8 / (t_last - t_first) of the data being fitted.
  std::optional<double> eigenvalue_real_cap;
  /// For real data, snap the converged eigenvalues onto conjugate pairs.
  bool enforce_conjugate_pairs = false;
  /// Lattice spacing of the sample times. Converged frequencies are folded
  /// into (-pi / step, pi / step], which leaves the fit unchanged on the
  /// lattice. Unset means the data's own step when uniformly sampled, and
  /// no folding otherwise.
  std::optional<double> sampling_step;

  /// Throws InvalidArgument unless tolerances are positive, max_iterations
  /// is at least one and marquardt_scale exceeds one.
  void validate() const;
};

enum class TerminationReason { GradientTol, StepTol, ResidualTol, MaxIters, Diverged };

std::string_view to_string(TerminationReason reason);

struct ConvergenceReport {
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
  /// Scaled gradient max_k |J_k^T r| / (||J_k|| ||r||) at the final iterate.
  double gradient_norm = 0.0;
  TerminationReason termination_reason = TerminationReason::MaxIters;
  /// Cost of the initial point followed by every accepted iterate.
  std::vector<double> cost_history;
};

struct VarproResidual {
  double cost = 0.0;
  Eigen::MatrixXcd residual;
};

/// Derivatives of vec(residual) (column-major, n*m rows) with respect to the
/// real and imaginary parts of each omega_j. The projected residual is not
/// holomorphic in omega, so the two partials are independent.
struct VarproJacobian {
  Eigen::MatrixXcd d_real;
  Eigen::MatrixXcd d_imag;
};

struct OptimizedFit {
  DmdModel model;
  ConvergenceReport report;
};

/// Entry (j, k) = exp(omega_j * t_k). Throws EigenvalueOverflow when some
/// Re(omega_j) * t_k exceeds 700.
Eigen::MatrixXcd time_dynamics_matrix(const Eigen::VectorXcd& omegas, const Eigen::VectorXd& times);

/// Phi_b = X pinv(T) with a relative singular-value cutoff.
Eigen::MatrixXcd solve_linear_stage(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& t,
                                    double pinv_threshold);

VarproResidual varpro_cost(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas,
                           const Eigen::VectorXd& times, double pinv_threshold);

VarproJacobian varpro_jacobian(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas,
                               const Eigen::VectorXd& times, double pinv_threshold);

/// Exact-DMD eigenvalues used as the default starting point.
Eigen::VectorXcd initialize_eigenvalues(const SnapshotMatrix& data, Eigen::Index rank);

/// Does not throw on failed convergence; inspect `report.converged`.
OptimizedFit optimized_dmd(const SnapshotMatrix& data, Eigen::Index rank,
                           const std::optional<Eigen::VectorXcd>& init_omegas,
                           const SolverConfig& config = {});

/// Shifts Im(omega) by multiples of 2 pi / step into (-pi / step, pi / step].
Eigen::VectorXcd fold_to_principal_band(const Eigen::VectorXcd& omegas, double step);

/// Replaces each eigenvalue and its nearest conjugate partner by the
/// symmetric average; eigenvalues closest to their own conjugate become real.
Eigen::VectorXcd pair_conjugates(const Eigen::VectorXcd& omegas);

}  // namespace bopdmd
