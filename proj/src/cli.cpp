#include "bopdmd/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bopdmd/archive.hpp"
#include "bopdmd/csv.hpp"
#include "bopdmd/datagen.hpp"
#include "bopdmd/forecast.hpp"

namespace bopdmd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitConvergence = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json omegas_to_json(const Eigen::VectorXcd& omegas) {
  json list = json::array();
  for (Eigen::Index j = 0; j < omegas.size(); ++j) {
    list.push_back({omegas(j).real(), omegas(j).imag()});
  }
  return {{"omegas", list}};
}

Eigen::VectorXcd omegas_from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  try {
    json doc;
    in >> doc;
    const auto& list = doc.at("omegas");
    Eigen::VectorXcd out(static_cast<Eigen::Index>(list.size()));
    for (std::size_t j = 0; j < list.size(); ++j) {
      out(static_cast<Eigen::Index>(j)) = cdouble(list[j].at(0).get<double>(), list[j].at(1).get<double>());
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

fs::path sibling(const fs::path& anchor, const std::string& name) {
  return anchor.parent_path() / name;
}

std::string fmt17(double v) {
  return format_complex(cdouble(v, 0.0), true);
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  std::string out;
  std::string truth;
  std::string omegas;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

void write_dataset(const SyntheticDataset& ds, const GenerateOptions& opt, std::ostream& out) {
  const fs::path data_path(opt.out);
  save_csv(ds.data, data_path);
  if (!opt.truth.empty()) {
    save_csv(ds.truth, opt.truth);
  }
  const fs::path omega_path = opt.omegas.empty() ? sibling(data_path, "omegas.json") : fs::path(opt.omegas);
  write_text(omega_path, omegas_to_json(ds.true_omegas).dump(2) + "\n");
  out << "wrote " << data_path.string() << " (" << ds.data.rows() << " x " << ds.data.cols() << ")\n";
}

// --------------------------------------------------------------------- fit

struct FitOptions {
  std::string method;
  Eigen::Index rank = 0;
  std::string in;
  std::string out;
  Eigen::Index p = 20;
  int k = 100;
  std::optional<std::uint64_t> seed;
  bool freeze_seed = false;
  int threads = 1;
  int max_redraws = 5;
  int max_iters = 200;
  double grad_tol = 1e-8;
  std::optional<double> real_cap;
  std::optional<double> reject_cap;
  bool conjugate_pairs = false;
};

json solver_echo(const SolverConfig& s) {
  json j = {{"max_iterations", s.max_iterations},
            {"gradient_tolerance", s.gradient_tolerance},
            {"step_tolerance", s.step_tolerance},
            {"residual_tolerance", s.residual_tolerance},
            {"marquardt_lambda_init", s.marquardt_lambda_init},
            {"marquardt_scale", s.marquardt_scale},
            {"pinv_threshold", s.pinv_threshold},
            {"enforce_conjugate_pairs", s.enforce_conjugate_pairs}};
  j["eigenvalue_real_cap"] = s.eigenvalue_real_cap ? json(*s.eigenvalue_real_cap) : json(nullptr);
  return j;
}

json report_echo(const ConvergenceReport& r) {
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"final_cost", r.final_cost},
          {"gradient_norm", r.gradient_norm},
          {"termination_reason", std::string(to_string(r.termination_reason))}};
}

void write_bop_tables(const EnsembleStatistics& stats, const fs::path& anchor) {
  std::ostringstream eig;
  eig << "index,mean_re,mean_im,var_re,var_im\n";
  for (Eigen::Index j = 0; j < stats.rank(); ++j) {
    eig << j << ',' << fmt17(stats.eigenvalue_mean(j).real()) << ','
        << fmt17(stats.eigenvalue_mean(j).imag()) << ',' << fmt17(stats.eigenvalue_variance_real(j))
        << ',' << fmt17(stats.eigenvalue_variance_imag(j)) << '\n';
  }
  write_text(sibling(anchor, "eigen_stats.csv"), eig.str());

  // Total (real + imaginary) variance per pixel and mode.
  std::ostringstream modes;
  modes << 'x';
  for (Eigen::Index j = 0; j < stats.rank(); ++j) {
    modes << ",mode" << j;
  }
  modes << '\n';
  const Eigen::MatrixXd total = stats.mode_variance_real + stats.mode_variance_imag;
  for (Eigen::Index i = 0; i < total.rows(); ++i) {
    modes << 'x' << i;
    for (Eigen::Index j = 0; j < total.cols(); ++j) {
      modes << ',' << fmt17(total(i, j));
    }
    modes << '\n';
  }
  write_text(sibling(anchor, "mode_variance.csv"), modes.str());
}

int run_fit(const FitOptions& opt, std::ostream& out, std::ostream& err) {
  const SnapshotMatrix data = load_csv(opt.in);
  SolverConfig solver;
  solver.max_iterations = opt.max_iters;
  solver.gradient_tolerance = opt.grad_tol;
  solver.eigenvalue_real_cap = opt.real_cap;
  solver.enforce_conjugate_pairs = opt.conjugate_pairs;

  ModelArchive archive;
  archive.metadata = {{"rank", opt.rank},
                      {"method", opt.method},
                      {"n", data.rows()},
                      {"m", data.cols()},
                      {"t_start", data.times()(0)},
                      {"t_end", data.times()(data.cols() - 1)},
                      {"solver", solver_echo(solver)}};
  int status = 0;

  if (opt.method == "exact") {
    auto [model, spectrum] = exact_dmd(data, opt.rank);
    archive.kind = ModelKind::Exact;
    archive.model = std::move(model);
    archive.metadata["eigenvector_condition"] = spectrum.eigenvector_condition;
    archive.metadata["rank_deficient"] = spectrum.rank_deficient;
  } else if (opt.method == "opt") {
    OptimizedFit fit = optimized_dmd(data, opt.rank, std::nullopt, solver);
    archive.kind = ModelKind::Optimized;
    archive.model = std::move(fit.model);
    archive.metadata["convergence"] = report_echo(fit.report);
    if (!fit.report.converged) {
      err << "warning: optimized DMD did not converge ("
          << to_string(fit.report.termination_reason) << ")\n";
      status = kExitConvergence;
    }
  } else {
    if (!opt.seed) {
      throw UsageError("fit --method bop requires --seed");
    }
    BagConfig bag;
    bag.bag_size = opt.p;
    bag.trials = opt.k;
    bag.base_seed = *opt.seed;
    bag.max_redraws = opt.max_redraws;
    bag.threads = opt.threads;
    bag.freeze_seed = opt.freeze_seed || opt.threads > 1;
    bag.rejection_real_cap = opt.reject_cap;
    BopResult result = bop_dmd(data, opt.rank, bag, solver);
    archive.kind = ModelKind::BopEnsemble;
    archive.model = result.statistics.mean_model();
    archive.metadata["seed"] = *opt.seed;
    archive.metadata["bag"] = {{"p", opt.p},
                               {"k", opt.k},
                               {"max_redraws", opt.max_redraws},
                               {"freeze_seed", bag.freeze_seed},
                               {"threads", opt.threads}};
    archive.metadata["base_convergence"] = report_echo(result.base.report);
    write_bop_tables(result.statistics, fs::path(opt.out));
    out << "accepted " << result.statistics.accepted_trials << " trials, rejected "
        << result.statistics.rejected_trials << "\n";
    archive.ensemble = std::move(result.statistics);
  }
  save_archive(archive, opt.out);
  out << "wrote " << opt.out << "\n";
  return status;
}

// ---------------------------------------------------------------- forecast

struct ForecastOptions {
  std::string model;
  double t_start = 0.0;
  double t_end = 1.0;
  Eigen::Index steps = 50;
  int draws = 100;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string var_out;
};

int run_forecast(const ForecastOptions& opt, std::ostream& out) {
  if (!opt.seed) {
    throw UsageError("forecast requires --seed");
  }
  if (opt.steps < 2 || !(opt.t_end > opt.t_start)) {
    throw UsageError("forecast needs --steps >= 2 and --t-end > --t-start");
  }
  const ModelArchive archive = load_archive(opt.model);
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(opt.steps, opt.t_start, opt.t_end);
  Forecast fc;
  if (archive.ensemble) {
    fc = forecast(*archive.ensemble, times, opt.draws, *opt.seed);
  } else {
    // A single model has no spread to sample from.
    fc.times = times;
    fc.mean = reconstruct(archive.model, times);
    fc.variance = Eigen::MatrixXd::Zero(fc.mean.rows(), fc.mean.cols());
    fc.variance_imag = fc.variance;
    fc.draws = 0;
  }
  save_csv(fc.mean, fc.times, opt.out);
  if (!opt.var_out.empty()) {
    save_csv(fc.variance.cast<cdouble>(), fc.times, opt.var_out);
  }
  out << "wrote " << opt.out << "\n";
  return 0;
}

// ------------------------------------------------------------------ report

json nullable(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

int run_report(const std::string& model_path, const std::string& truth_path,
               const std::string& out_path, std::ostream& out) {
  const ModelArchive archive = load_archive(model_path);
  const Eigen::VectorXcd truth = omegas_from_file(truth_path);
  const Eigen::VectorXcd& estimate = archive.model.eigenvalues;
  if (truth.size() != estimate.size()) {
    throw Error(ErrorCode::ShapeMismatch, "model rank " + std::to_string(estimate.size()) +
                                              " differs from " + std::to_string(truth.size()) +
                                              " true eigenvalues");
  }
  // Slot j of `source` is the model eigenvalue matched to truth j.
  const std::vector<Eigen::Index> source = match_eigenvalues(estimate, truth);
  json rows = json::array();
  double max_error = 0.0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    const Eigen::Index s = source[static_cast<std::size_t>(j)];
    const cdouble est = estimate(s);
    const double error = std::abs(est - truth(j));
    max_error = std::max(max_error, error);
    json row = {{"truth", {truth(j).real(), truth(j).imag()}},
                {"estimate", {est.real(), est.imag()}},
                {"model_index", s},
                {"abs_error", error}};
    if (archive.ensemble) {
      const double sd_re = std::sqrt(archive.ensemble->eigenvalue_variance_real(s));
      const double sd_im = std::sqrt(archive.ensemble->eigenvalue_variance_imag(s));
      const double d_re = truth(j).real() - est.real();
      const double d_im = truth(j).imag() - est.imag();
      row["std_real"] = sd_re;
      row["std_imag"] = sd_im;
      row["z_real"] = nullable(d_re == 0.0 ? 0.0 : d_re / sd_re);
      row["z_imag"] = nullable(d_im == 0.0 ? 0.0 : d_im / sd_im);
    }
    rows.push_back(std::move(row));
  }
  const json doc = {{"kind", std::string(to_string(archive.kind))},
                    {"max_abs_error", max_error},
                    {"eigenvalues", rows}};
  if (out_path.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    write_text(out_path, doc.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"BOP-DMD: bagging, optimized dynamic mode decomposition", "bopdmd"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->require_subcommand(1);
  GenerateOptions gen;
  ToySpec toy;
  auto* toy_cmd = generate->add_subcommand("toy", "Three-mode toy system (sin, cos, tanh)");
  toy_cmd->add_option("--sigma", gen.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  toy_cmd->add_option("--n", toy.n, "Spatial points")->check(CLI::Range(2, 1 << 24));
  toy_cmd->add_option("--m", toy.m, "Time points")->check(CLI::Range(2, 1 << 24));
  toy_cmd->add_option("--seed", gen.seed, "Noise seed");
  toy_cmd->add_option("--out", gen.out, "Noisy data CSV")->required();
  toy_cmd->add_option("--truth", gen.truth, "Noise-free data CSV");
  toy_cmd->add_option("--omegas", gen.omegas, "True eigenvalues JSON (default: omegas.json next to --out)");
  toy_cmd->add_flag("--real", toy.real_part, "Keep only the real part of the field");
  toy_cmd->add_option("--outliers", toy.outlier_fraction, "Fraction of entries replaced by +-10 sigma spikes")
      ->check(CLI::Range(0.0, 1.0));

  OscillatorSpec osc;
  auto* osc_cmd = generate->add_subcommand("oscillator", "Gaussian-bump oscillator field");
  osc_cmd->add_option("--freqs", osc.frequencies, "Angular frequencies")->delimiter(',');
  osc_cmd->add_option("--decays", osc.decays, "Growth rates (same length as --freqs)")->delimiter(',');
  osc_cmd->add_option("--nx", osc.nx, "Grid points along x")->check(CLI::Range(1, 1 << 20));
  osc_cmd->add_option("--ny", osc.ny, "Grid points along y")->check(CLI::Range(1, 1 << 20));
  osc_cmd->add_option("--m", osc.m, "Time points")->check(CLI::Range(2, 1 << 24));
  osc_cmd->add_option("--t-start", osc.t_min, "First sample time");
  osc_cmd->add_option("--t-end", osc.t_max, "Last sample time");
  osc_cmd->add_option("--sigma", gen.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  osc_cmd->add_option("--seed", gen.seed, "Noise seed");
  osc_cmd->add_option("--out", gen.out, "Noisy data CSV")->required();
  osc_cmd->add_option("--truth", gen.truth, "Noise-free data CSV");
  osc_cmd->add_option("--omegas", gen.omegas, "True eigenvalues JSON (default: omegas.json next to --out)");

  // fit
  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an exact, optimized or bagged DMD model");
  fit_cmd->add_option("--method", fit.method, "exact | opt | bop")
      ->required()
      ->check(CLI::IsMember({"exact", "opt", "bop"}));
  fit_cmd->add_option("--rank", fit.rank, "Model rank")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--in", fit.in, "Snapshot CSV")->required();
  fit_cmd->add_option("--out", fit.out, "Model archive JSON")->required();
  fit_cmd->add_option("--p", fit.p, "Snapshots per bag")->check(CLI::Range(2, 1 << 24));
  fit_cmd->add_option("--k", fit.k, "Bagging trials")->check(CLI::Range(2, 1 << 24));
  fit_cmd->add_option("--seed", fit.seed, "Bagging seed (required for bop)");
  fit_cmd->add_flag("--freeze-seed", fit.freeze_seed, "Seed every trial from the full-data fit");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads (>1 implies --freeze-seed)")
      ->check(CLI::Range(1, 1024));
  fit_cmd->add_option("--max-redraws", fit.max_redraws, "Redraws per rejected trial")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--max-iters", fit.max_iters, "Levenberg-Marquardt iteration cap")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--grad-tol", fit.grad_tol, "Scaled gradient tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--real-cap", fit.real_cap, "Largest Re(omega) a converged fit may have");
  fit_cmd->add_option("--reject-cap", fit.reject_cap, "Largest Re(omega) an accepted bagging trial may have");
  fit_cmd->add_flag("--conjugate-pairs", fit.conjugate_pairs, "Pair eigenvalues as conjugates for real data");

  // forecast
  ForecastOptions fco;
  auto* fc_cmd = app.add_subcommand("forecast", "Monte-Carlo forecast from a model archive");
  fc_cmd->add_option("--model", fco.model, "Model archive JSON")->required();
  fc_cmd->add_option("--t-start", fco.t_start, "First forecast time")->required();
  fc_cmd->add_option("--t-end", fco.t_end, "Last forecast time")->required();
  fc_cmd->add_option("--steps", fco.steps, "Number of forecast times")->check(CLI::Range(2, 1 << 24));
  fc_cmd->add_option("--draws", fco.draws, "Monte-Carlo draws")->check(CLI::Range(2, 1 << 24));
  fc_cmd->add_option("--seed", fco.seed, "Sampling seed (required)");
  fc_cmd->add_option("--out", fco.out, "Forecast mean CSV")->required();
  fc_cmd->add_option("--var-out", fco.var_out, "Forecast variance CSV");

  // report
  std::string report_model, report_truth, report_out;
  auto* report_cmd = app.add_subcommand("report", "Eigenvalue errors and ensemble z-scores");
  report_cmd->add_option("--model", report_model, "Model archive JSON")->required();
  report_cmd->add_option("--truth-omegas", report_truth, "True eigenvalues JSON")->required();
  report_cmd->add_option("--out", report_out, "Report JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*toy_cmd) {
      toy.sigma = gen.sigma;
      toy.seed = gen.seed;
      write_dataset(toy_dataset(toy), gen, out);
      return 0;
    }
    if (*osc_cmd) {
      osc.sigma = gen.sigma;
      osc.seed = gen.seed;
      write_dataset(oscillator_surrogate(osc), gen, out);
      return 0;
    }
    if (*fit_cmd) {
      return run_fit(fit, out, err);
    }
    if (*fc_cmd) {
      return run_forecast(fco, out);
    }
    if (*report_cmd) {
      return run_report(report_model, report_truth, report_out, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::TooFewAcceptedTrials ? kExitConvergence : kExitData;
  }
  return kExitUsage;
}

}  // namespace bopdmd
