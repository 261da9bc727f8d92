#include "bopdmd/varpro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace bopdmd {

void SolverConfig::validate() const {
  if (max_iterations < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_iterations must be at least 1");
  }
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) || !(residual_tolerance > 0.0) ||
      !(pinv_threshold > 0.0) || !(marquardt_lambda_init > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "solver tolerances must be positive");
  }
  if (sampling_step && !(*sampling_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sampling_step must be positive");
  }
  if (!(marquardt_scale > 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "marquardt_scale must exceed 1");
  }
}

std::string_view to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::GradientTol: return "GradientTol";
    case TerminationReason::StepTol: return "StepTol";
    case TerminationReason::ResidualTol: return "ResidualTol";
    case TerminationReason::MaxIters: return "MaxIters";
    case TerminationReason::Diverged: return "Diverged";
  }
  return "Unknown";
}

Eigen::MatrixXcd time_dynamics_matrix(const Eigen::VectorXcd& omegas, const Eigen::VectorXd& times) {
  if (!omegas.allFinite() || !times.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "eigenvalues and times must be finite");
  }
  Eigen::MatrixXcd t(omegas.size(), times.size());
  for (Eigen::Index j = 0; j < omegas.size(); ++j) {
    for (Eigen::Index k = 0; k < times.size(); ++k) {
      if (omegas(j).real() * times(k) > 700.0) {
        throw Error(ErrorCode::EigenvalueOverflow,
                    "exp(omega t) overflows for omega index " + std::to_string(j));
      }
      t(j, k) = std::exp(omegas(j) * times(k));
    }
  }
  return t;
}

Eigen::MatrixXcd solve_linear_stage(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& t,
                                    double pinv_threshold) {
  if (x.cols() != t.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "data and dynamics have different column counts");
  }
  return x * pseudo_inverse(t, pinv_threshold);
}

namespace {

// Everything one evaluation of the projected problem produces.
struct Projection {
  Eigen::MatrixXcd dynamics;      // T, r x m
  Eigen::MatrixXcd dynamics_pinv;  // pinv(T), m x r
  Eigen::MatrixXcd scaled_modes;   // Phi_b, n x r
  Eigen::MatrixXcd residual;       // X - Phi_b T
  double cost = 0.0;
};

Projection project(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas,
                   const Eigen::VectorXd& times, double pinv_threshold) {
  if (x.cols() != times.size()) {
    throw Error(ErrorCode::ShapeMismatch, "data columns and sample times differ");
  }
  Projection p;
  p.dynamics = time_dynamics_matrix(omegas, times);
  p.dynamics_pinv = pseudo_inverse(p.dynamics, pinv_threshold);
  p.scaled_modes = x * p.dynamics_pinv;
  p.residual = x - p.scaled_modes * p.dynamics;
  p.cost = p.residual.squaredNorm();
  return p;
}

// d vec(R) / d Re(omega_j) = -(u1 + u2) and d vec(R) / d Im(omega_j) = i (u1 - u2) with
//   u1 = (R conj(d_j)) conj(pinv(T)[:, j])^T,   u2 = Phi_b[:, j] (d_j^T (I - pinv(T) T)),
// where d_j[k] = t_k exp(omega_j t_k). These follow from differentiating the
// orthogonal projector pinv(T) T along a real parameter.
VarproJacobian jacobian(const Projection& p, const Eigen::VectorXd& times) {
  const Eigen::Index n = p.residual.rows();
  const Eigen::Index m = p.residual.cols();
  const Eigen::Index r = p.dynamics.rows();
  VarproJacobian jac{Eigen::MatrixXcd(n * m, r), Eigen::MatrixXcd(n * m, r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    const Eigen::RowVectorXcd d = p.dynamics.row(j).cwiseProduct(times.transpose().cast<cdouble>());
    const Eigen::VectorXcd r_dbar = p.residual * d.adjoint();
    const Eigen::RowVectorXcd pinv_col = p.dynamics_pinv.col(j).adjoint();
    const Eigen::RowVectorXcd d_perp = d - (d * p.dynamics_pinv) * p.dynamics;
    const Eigen::MatrixXcd u1 = r_dbar * pinv_col;
    const Eigen::MatrixXcd u2 = p.scaled_modes.col(j) * d_perp;
    const Eigen::Map<const Eigen::VectorXcd> u1v(u1.data(), n * m);
    const Eigen::Map<const Eigen::VectorXcd> u2v(u2.data(), n * m);
    jac.d_real.col(j) = -(u1v + u2v);
    jac.d_imag.col(j) = cdouble(0.0, 1.0) * (u1v - u2v);
  }
  return jac;
}

// Real-coordinate pack: theta = (Re omega_0..r-1, Im omega_0..r-1).
Eigen::VectorXd pack(const Eigen::VectorXcd& omegas) {
  const Eigen::Index r = omegas.size();
  Eigen::VectorXd theta(2 * r);
  theta.head(r) = omegas.real();
  theta.tail(r) = omegas.imag();
  return theta;
}

Eigen::VectorXcd unpack(const Eigen::VectorXd& theta) {
  const Eigen::Index r = theta.size() / 2;
  Eigen::VectorXcd omegas(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    omegas(j) = cdouble(theta(j), theta(r + j));
  }
  return omegas;
}

// Normal-equation blocks H = Re(J^* J) and g = Re(J^* r) of the real problem.
struct NormalEquations {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double scaled_gradient = 0.0;
};

NormalEquations normal_equations(const Projection& p, const Eigen::VectorXd& times) {
  const VarproJacobian jac = jacobian(p, times);
  const Eigen::Index r = jac.d_real.cols();
  Eigen::MatrixXcd full(jac.d_real.rows(), 2 * r);
  full << jac.d_real, jac.d_imag;
  const Eigen::Map<const Eigen::VectorXcd> res(p.residual.data(), p.residual.size());

  NormalEquations ne;
  ne.hessian = (full.adjoint() * full).real();
  ne.gradient = (full.adjoint() * res).real();
  const double res_norm = res.norm();
  for (Eigen::Index k = 0; k < 2 * r; ++k) {
    const double col_norm = std::sqrt(std::max(ne.hessian(k, k), 0.0));
    if (col_norm > 0.0 && res_norm > 0.0) {
      ne.scaled_gradient =
          std::max(ne.scaled_gradient, std::abs(ne.gradient(k)) / (col_norm * res_norm));
    }
  }
  return ne;
}

}  // namespace

VarproResidual varpro_cost(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas,
                           const Eigen::VectorXd& times, double pinv_threshold) {
  Projection p = project(x, omegas, times, pinv_threshold);
  return {p.cost, std::move(p.residual)};
}

VarproJacobian varpro_jacobian(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas,
                               const Eigen::VectorXd& times, double pinv_threshold) {
  return jacobian(project(x, omegas, times, pinv_threshold), times);
}

Eigen::VectorXcd initialize_eigenvalues(const SnapshotMatrix& data, Eigen::Index rank) {
  return exact_dmd(data, rank).first.eigenvalues;
}

Eigen::VectorXcd fold_to_principal_band(const Eigen::VectorXcd& omegas, double step) {
  const double period = 2.0 * std::numbers::pi / step;
  const double half = 0.5 * period;
  Eigen::VectorXcd out = omegas;
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    double im = out(j).imag();
    if (im > half || im <= -half) {
      im -= period * std::ceil((im - half) / period);
    }
    out(j) = cdouble(out(j).real(), im);
  }
  return out;
}

Eigen::VectorXcd pair_conjugates(const Eigen::VectorXcd& omegas) {
  const Eigen::Index r = omegas.size();
  Eigen::VectorXcd out = omegas;
  std::vector<bool> done(static_cast<std::size_t>(r), false);
  for (Eigen::Index j = 0; j < r; ++j) {
    if (done[static_cast<std::size_t>(j)]) {
      continue;
    }
    done[static_cast<std::size_t>(j)] = true;
    // Distance to its own conjugate, i.e. how far from the real axis it is.
    double best = 2.0 * std::abs(omegas(j).imag());
    Eigen::Index partner = -1;
    for (Eigen::Index k = j + 1; k < r; ++k) {
      if (done[static_cast<std::size_t>(k)]) {
        continue;
      }
      const double d = std::abs(omegas(k) - std::conj(omegas(j)));
      if (d < best) {
        best = d;
        partner = k;
      }
    }
    if (partner < 0) {
      out(j) = cdouble(omegas(j).real(), 0.0);
      continue;
    }
    done[static_cast<std::size_t>(partner)] = true;
    const cdouble avg = 0.5 * (omegas(j) + std::conj(omegas(partner)));
    out(j) = avg;
    out(partner) = std::conj(avg);
  }
  return out;
}

OptimizedFit optimized_dmd(const SnapshotMatrix& data, Eigen::Index rank,
                           const std::optional<Eigen::VectorXcd>& init_omegas,
                           const SolverConfig& config) {
  config.validate();
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  if (rank < 1 || rank > std::min(n, m)) {
    throw Error(ErrorCode::InvalidRank, "rank " + std::to_string(rank) + " outside [1, min(n, m)]");
  }
  Eigen::VectorXcd omegas = init_omegas ? *init_omegas : initialize_eigenvalues(data, rank);
  if (omegas.size() != rank) {
    throw Error(ErrorCode::InvalidRank, "initial eigenvalue count differs from rank");
  }
  const Eigen::VectorXd& times = data.times();
  const double real_cap = config.eigenvalue_real_cap.value_or(8.0 / data.time_span());

  // ||X (I - Q)||_F is unchanged by replacing X = U S V^* with S V^*, which
  // has at most min(n, m) rows.
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(data.values(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXcd compressed = svd.singularValues().asDiagonal() * svd.matrixV().adjoint();
  const double data_norm = svd.singularValues().norm();

  ConvergenceReport report;
  Projection current = project(compressed, omegas, times, config.pinv_threshold);
  Eigen::VectorXd theta = pack(omegas);
  report.cost_history.push_back(current.cost);
  double lambda = config.marquardt_lambda_init;

  auto residual_small = [&](const Projection& p) {
    return std::sqrt(p.cost) <= config.residual_tolerance * data_norm;
  };

  bool finished = false;
  while (!finished) {
    if (residual_small(current)) {
      report.termination_reason = TerminationReason::ResidualTol;
      break;
    }
    const NormalEquations ne = normal_equations(current, times);
    report.gradient_norm = ne.scaled_gradient;
    if (ne.scaled_gradient <= config.gradient_tolerance) {
      report.termination_reason = TerminationReason::GradientTol;
      break;
    }
    if (report.iterations >= config.max_iterations) {
      report.termination_reason = TerminationReason::MaxIters;
      break;
    }

    // Uniform damping: per-coordinate scaling lets a strongly damped mode,
    // whose Hessian entries are tiny, take unbounded steps.
    const double damping = std::max(ne.hessian.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd lhs = ne.hessian;
      lhs.diagonal().array() += lambda * damping;
      const Eigen::VectorXd step = lhs.ldlt().solve(-ne.gradient);
      if (!step.allFinite() || lambda > 1e20) {
        report.termination_reason = TerminationReason::StepTol;
        finished = true;
        break;
      }
      if (step.norm() <= config.step_tolerance * (theta.norm() + config.step_tolerance)) {
        report.termination_reason = TerminationReason::StepTol;
        finished = true;
        break;
      }
      const Eigen::VectorXd trial_theta = theta + step;
      double trial_cost = std::numeric_limits<double>::infinity();
      Projection trial;
      try {
        trial = project(compressed, unpack(trial_theta), times, config.pinv_threshold);
        trial_cost = trial.cost;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EigenvalueOverflow) {
          throw;
        }
      }
      if (std::isfinite(trial_cost) && trial_cost < current.cost) {
        theta = trial_theta;
        current = std::move(trial);
        lambda = std::max(lambda / config.marquardt_scale, 1e-16);
        ++report.iterations;
        report.cost_history.push_back(current.cost);
        accepted = true;
      } else {
        lambda *= config.marquardt_scale;
      }
    }
  }

  omegas = unpack(theta);
  std::optional<double> step = config.sampling_step;
  if (!step) {
    try {
      step = uniform_step(times);
    } catch (const Error&) {
    }
  }
  bool reproject = false;
  if (step && omegas.allFinite()) {
    const Eigen::VectorXcd folded = fold_to_principal_band(omegas, *step);
    reproject = folded != omegas;
    omegas = folded;
  }
  if (config.enforce_conjugate_pairs && data.is_real() && omegas.allFinite()) {
    omegas = pair_conjugates(omegas);
    reproject = true;
  }
  if (reproject) {
    current = project(compressed, omegas, times, config.pinv_threshold);
  }

  report.final_cost = current.cost;
  report.converged = report.termination_reason != TerminationReason::MaxIters;
  const bool blew_up = !omegas.allFinite() || !std::isfinite(current.cost);
  if (blew_up || omegas.real().maxCoeff() > real_cap) {
    report.termination_reason = TerminationReason::Diverged;
    report.converged = false;
  }

  OptimizedFit fit{model_from_scaled_modes(svd.matrixU() * current.scaled_modes, omegas),
                   std::move(report)};
  return fit;
}

}  // namespace bopdmd
