#include "bopdmd/bop.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <string>
#include <thread>

#include "bopdmd/assignment.hpp"

namespace bopdmd {

void BagConfig::validate(Eigen::Index m, Eigen::Index rank) const {
  if (bag_size < 2 || bag_size >= m) {
    throw Error(ErrorCode::InvalidBagSize, "bag size " + std::to_string(bag_size) +
                                               " must satisfy 2 <= p < m = " + std::to_string(m));
  }
  if (bag_size < rank) {
    throw Error(ErrorCode::InvalidBagSize, "bag size " + std::to_string(bag_size) +
                                               " is smaller than the rank " + std::to_string(rank));
  }
  if (trials < 2) {
    throw Error(ErrorCode::InvalidArgument, "need at least two trials");
  }
  if (max_redraws < 0 || threads < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_redraws must be >= 0 and threads >= 1");
  }
}

DmdModel EnsembleStatistics::mean_model() const {
  return DmdModel{mode_mean, eigenvalue_mean, amplitude_mean};
}

std::vector<Eigen::Index> sample_bag(Eigen::Index m, Eigen::Index bag_size, Rng& rng,
                                     bool with_replacement) {
  if (bag_size < 1 || bag_size >= m) {
    throw Error(ErrorCode::InvalidBagSize,
                "cannot choose " + std::to_string(bag_size) + " of " + std::to_string(m) + " snapshots");
  }
  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(bag_size));
  if (with_replacement) {
    std::uniform_int_distribution<Eigen::Index> dist(0, m - 1);
    for (Eigen::Index k = 0; k < bag_size; ++k) {
      picked.push_back(dist(rng));
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    return picked;
  }
  // Partial Fisher-Yates: the first bag_size slots end up a uniform subset.
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(m));
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  for (Eigen::Index k = 0; k < bag_size; ++k) {
    std::uniform_int_distribution<Eigen::Index> dist(k, m - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(dist(rng))]);
  }
  picked.assign(pool.begin(), pool.begin() + bag_size);
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<Eigen::Index> match_eigenvalues(const Eigen::VectorXcd& eigenvalues,
                                            const Eigen::VectorXcd& reference) {
  const Eigen::Index r = reference.size();
  if (eigenvalues.size() != r) {
    throw Error(ErrorCode::ShapeMismatch, "cannot match eigenvalue sets of different size");
  }
  Eigen::MatrixXd cost(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) {
      cost(i, j) = std::abs(eigenvalues(i) - reference(j));
    }
  }
  // solve_assignment maps model index -> reference slot; invert it so that
  // result[j] is the model index placed in slot j.
  const std::vector<Eigen::Index> to_slot = solve_assignment(cost);
  std::vector<Eigen::Index> source(static_cast<std::size_t>(r));
  for (Eigen::Index i = 0; i < r; ++i) {
    source[static_cast<std::size_t>(to_slot[static_cast<std::size_t>(i)])] = i;
  }
  return source;
}

DmdModel align_to_reference(const DmdModel& model, const DmdModel& reference) {
  if (model.rank() != reference.rank()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot align models of different rank");
  }
  const std::vector<Eigen::Index> source = match_eigenvalues(model.eigenvalues, reference.eigenvalues);
  DmdModel out{Eigen::MatrixXcd(model.modes.rows(), model.rank()), Eigen::VectorXcd(model.rank()),
               Eigen::VectorXcd(model.rank())};
  for (Eigen::Index j = 0; j < model.rank(); ++j) {
    const Eigen::Index s = source[static_cast<std::size_t>(j)];
    out.modes.col(j) = model.modes.col(s);
    out.eigenvalues(j) = model.eigenvalues(s);
    out.amplitudes(j) = model.amplitudes(s);
  }
  normalize_model(out);
  return out;
}

namespace {

template <typename Derived>
void accumulate_variance(const std::vector<DmdModel>& models, Derived get,
                         const Eigen::MatrixXcd& mean, Eigen::MatrixXd& var_re,
                         Eigen::MatrixXd& var_im) {
  var_re = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
  var_im = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
  for (const DmdModel& model : models) {
    const Eigen::MatrixXcd d = get(model) - mean;
    var_re.array() += d.real().array().square();
    var_im.array() += d.imag().array().square();
  }
  const double denom = static_cast<double>(models.size() - 1);
  var_re /= denom;
  var_im /= denom;
}

}  // namespace

EnsembleStatistics ensemble_statistics(const std::vector<DmdModel>& models) {
  if (models.size() < 2) {
    throw Error(ErrorCode::InsufficientModels, "need at least two models, got " +
                                                   std::to_string(models.size()));
  }
  const Eigen::Index n = models.front().state_dim();
  const Eigen::Index r = models.front().rank();
  for (const DmdModel& model : models) {
    if (model.state_dim() != n || model.rank() != r || model.modes.cols() != r ||
        model.amplitudes.size() != r) {
      throw Error(ErrorCode::ShapeMismatch, "ensemble members have inconsistent shapes");
    }
  }
  const double count = static_cast<double>(models.size());

  // Members anchor their phase at their own largest entry, which can differ
  // between members when a mode has near-equal peaks. Re-anchor everyone at
  // the largest entry of the raw mean so averages do not mix gauges.
  Eigen::MatrixXcd raw_mean = Eigen::MatrixXcd::Zero(n, r);
  for (const DmdModel& model : models) {
    raw_mean += model.modes;
  }
  std::vector<DmdModel> anchored = models;
  std::vector<Eigen::Index> anchor(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) {
    raw_mean.col(j).cwiseAbs().maxCoeff(&anchor[static_cast<std::size_t>(j)]);
    const Eigen::Index a = anchor[static_cast<std::size_t>(j)];
    for (DmdModel& model : anchored) {
      const cdouble z = model.modes(a, j);
      const double mag = std::abs(z);
      if (mag == 0.0) {
        continue;
      }
      const cdouble unit = std::conj(z) / mag;
      model.modes.col(j) *= unit;
      model.modes(a, j) = mag;
      model.amplitudes(j) /= unit;
    }
  }

  Eigen::MatrixXcd mode_sum = Eigen::MatrixXcd::Zero(n, r);
  Eigen::VectorXcd eig_sum = Eigen::VectorXcd::Zero(r);
  Eigen::VectorXcd amp_sum = Eigen::VectorXcd::Zero(r);
  for (const DmdModel& model : anchored) {
    mode_sum += model.modes;
    eig_sum += model.eigenvalues;
    amp_sum += model.amplitudes;
  }

  EnsembleStatistics stats;
  Eigen::MatrixXcd mode_mean = mode_sum / count;
  stats.eigenvalue_mean = eig_sum / count;
  stats.amplitude_mean = amp_sum / count;
  accumulate_variance(anchored, [](const DmdModel& m) -> Eigen::MatrixXcd { return m.modes; },
                      mode_mean, stats.mode_variance_real, stats.mode_variance_imag);

  Eigen::MatrixXd re, im;
  accumulate_variance(anchored, [](const DmdModel& m) -> Eigen::MatrixXcd { return m.eigenvalues; },
                      stats.eigenvalue_mean, re, im);
  stats.eigenvalue_variance_real = re.col(0);
  stats.eigenvalue_variance_imag = im.col(0);
  accumulate_variance(anchored, [](const DmdModel& m) -> Eigen::MatrixXcd { return m.amplitudes; },
                      stats.amplitude_mean, re, im);
  stats.amplitude_variance_real = re.col(0);
  stats.amplitude_variance_imag = im.col(0);

  // The mean is real and non-negative at the common anchor; restore unit norm.
  for (Eigen::Index j = 0; j < r; ++j) {
    const double norm = mode_mean.col(j).norm();
    if (norm > 0.0) {
      mode_mean.col(j) /= norm;
    }
    mode_mean(anchor[static_cast<std::size_t>(j)], j).imag(0.0);
  }
  stats.mode_mean = std::move(mode_mean);
  stats.accepted_trials = static_cast<int>(models.size());
  return stats;
}

namespace {

struct TrialOutcome {
  std::optional<DmdModel> model;
  int rejected = 0;
};

TrialOutcome run_trial(const SnapshotMatrix& data, Eigen::Index rank, const BagConfig& bag,
                       const SolverConfig& solver, const DmdModel& reference,
                       const Eigen::VectorXcd& seed, double real_cap, std::uint64_t trial) {
  TrialOutcome outcome;
  Rng rng = derived_rng(bag.base_seed, trial);
  for (int attempt = 0; attempt <= bag.max_redraws; ++attempt) {
    const std::vector<Eigen::Index> idx =
        sample_bag(data.cols(), bag.bag_size, rng, bag.with_replacement);
    try {
      if (static_cast<Eigen::Index>(idx.size()) < std::max<Eigen::Index>(rank, 2)) {
        throw Error(ErrorCode::InvalidBagSize, "bag collapsed below the rank");
      }
      const OptimizedFit fit = optimized_dmd(data.select_columns(idx), rank, seed, solver);
      if (fit.report.converged && fit.model.eigenvalues.real().maxCoeff() <= real_cap) {
        outcome.model = align_to_reference(fit.model, reference);
        return outcome;
      }
    } catch (const Error&) {
      // Overflowing or degenerate bags count as rejected draws.
    }
    ++outcome.rejected;
  }
  return outcome;
}

}  // namespace

BopResult bop_dmd(const SnapshotMatrix& data, Eigen::Index rank, const BagConfig& bag,
                  const SolverConfig& solver) {
  bag.validate(data.cols(), rank);
  solver.validate();
  BopResult result{{}, {}, optimized_dmd(data, rank, std::nullopt, solver)};
  const DmdModel& reference = result.base.model;
  const double real_cap = bag.rejection_real_cap.value_or(2.0 / data.time_span());
  // Bags are irregular subsets of the full time grid, so fold their
  // frequencies with the full grid's step.
  SolverConfig trial_solver = solver;
  if (!trial_solver.sampling_step) {
    try {
      trial_solver.sampling_step = uniform_step(data.times());
    } catch (const Error&) {
    }
  }
  const auto trials = static_cast<std::size_t>(bag.trials);
  std::vector<TrialOutcome> outcomes(trials);

  if (bag.threads > 1) {
    // Frozen seed: every trial is independent of the others.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < trials; k = next++) {
        outcomes[k] = run_trial(data, rank, bag, trial_solver, reference, reference.eigenvalues,
                                real_cap, k);
      }
    };
    std::vector<std::thread> pool;
    const int workers = std::min<int>(bag.threads, bag.trials);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  } else {
    Eigen::VectorXcd seed = reference.eigenvalues;
    for (std::size_t k = 0; k < trials; ++k) {
      outcomes[k] = run_trial(data, rank, bag, trial_solver, reference, seed, real_cap, k);
      if (outcomes[k].model && !bag.freeze_seed) {
        seed = outcomes[k].model->eigenvalues;
      }
    }
  }

  int rejected = 0;
  for (TrialOutcome& outcome : outcomes) {
    rejected += outcome.rejected;
    if (outcome.model) {
      result.models.push_back(std::move(*outcome.model));
    }
  }
  if (result.models.size() < 2) {
    throw Error(ErrorCode::TooFewAcceptedTrials,
                std::to_string(result.models.size()) + " of " + std::to_string(bag.trials) +
                    " trials accepted after redraws");
  }
  result.statistics = ensemble_statistics(result.models);
  result.statistics.rejected_trials = rejected;
  return result;
}

}  // namespace bopdmd
