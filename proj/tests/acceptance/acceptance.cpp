// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
// its measured values and runtime against the runtime budget. Pass criterion
// numbers as arguments to run a subset; exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bopdmd/archive.hpp"
#include "bopdmd/cli.hpp"
#include "bopdmd/csv.hpp"
#include "bopdmd/datagen.hpp"
#include "bopdmd/forecast.hpp"
#include "test_support.hpp"

using namespace bopdmd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

/// Errors |estimate[source[j]] - truth[j]| under the optimal matching.
std::vector<double> matched_errors(const Eigen::VectorXcd& estimate, const Eigen::VectorXcd& truth,
                                   std::vector<Eigen::Index>* source_out = nullptr) {
  const std::vector<Eigen::Index> source = match_eigenvalues(estimate, truth);
  std::vector<double> errs;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    errs.push_back(std::abs(estimate(source[static_cast<std::size_t>(j)]) - truth(j)));
  }
  if (source_out) {
    *source_out = source;
  }
  return errs;
}

// -------------------------------------------------------------------------

Outcome noise_free_recovery() {
  const SyntheticDataset ds = toy_dataset({.n = 128, .m = 100});
  const double exact = testing::max_of(matched_errors(exact_dmd(ds.data, 3).first.eigenvalues, ds.true_omegas));
  const OptimizedFit fit = optimized_dmd(ds.data, 3, std::nullopt);
  const double opt = testing::max_of(matched_errors(fit.model.eigenvalues, ds.true_omegas));
  return {exact <= 1e-6 && opt <= 1e-6 && fit.report.converged,
          fmt("max error exact %.2e, opt %.2e (bound 1e-6)", exact, opt)};
}

Outcome debiasing() {
  constexpr int seeds = 50;
  double exact_err[3] = {0, 0, 0};
  double opt_err[3] = {0, 0, 0};
  double exact_re_i = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const SyntheticDataset ds = toy_dataset({.sigma = 0.05, .seed = static_cast<std::uint64_t>(2000 + s)});
    std::vector<Eigen::Index> source;
    const Eigen::VectorXcd ex = exact_dmd(ds.data, 3).first.eigenvalues;
    const std::vector<double> e1 = matched_errors(ex, ds.true_omegas, &source);
    exact_re_i += ex(source[1]).real();
    const std::vector<double> e2 = matched_errors(optimized_dmd(ds.data, 3, std::nullopt).model.eigenvalues,
                                                  ds.true_omegas);
    for (int j = 0; j < 3; ++j) {
      exact_err[j] += e1[static_cast<std::size_t>(j)] / seeds;
      opt_err[j] += e2[static_cast<std::size_t>(j)] / seeds;
    }
  }
  exact_re_i /= seeds;
  const bool better = opt_err[0] < exact_err[0] && opt_err[1] < exact_err[1] && opt_err[2] < exact_err[2];
  const bool damped = exact_re_i < 0.0;
  return {better && damped,
          fmt("mean error opt/exact: -2: %.3g/%.3g, i: %.3g/%.3g, 1: %.3g/%.3g [%s]; "
              "mean Re(exact omega matched to i) %+.4f (need < 0) [%s]",
              opt_err[0], exact_err[0], opt_err[1], exact_err[1], opt_err[2], exact_err[2],
              better ? "ok" : "not met", exact_re_i, damped ? "ok" : "not met")};
}

// Shared by criteria 3 and 5.
struct ReplicateSummary {
  int wins = 0;
  int inside = 0;
  double bop_err[3] = {0, 0, 0};
  double opt_err[3] = {0, 0, 0};
};

ReplicateSummary run_replicates(double sigma, Eigen::Index p, int reps) {
  ReplicateSummary out;
  for (int rep = 0; rep < reps; ++rep) {
    const SyntheticDataset ds =
        toy_dataset({.sigma = sigma, .seed = static_cast<std::uint64_t>(1000 + rep)});
    BagConfig bag;
    bag.bag_size = p;
    bag.trials = 100;
    bag.base_seed = static_cast<std::uint64_t>(rep);
    const BopResult res = bop_dmd(ds.data, 3, bag);
    const EnsembleStatistics& st = res.statistics;
    std::vector<Eigen::Index> source;
    const std::vector<double> eb = matched_errors(st.eigenvalue_mean, ds.true_omegas, &source);
    const std::vector<double> eo = matched_errors(res.base.model.eigenvalues, ds.true_omegas);
    bool all = true;
    bool in = true;
    for (std::size_t j = 0; j < 3; ++j) {
      out.bop_err[j] += eb[j] / reps;
      out.opt_err[j] += eo[j] / reps;
      all = all && eb[j] <= eo[j];
      const Eigen::Index k = source[j];
      const cdouble d = st.eigenvalue_mean(k) - ds.true_omegas(static_cast<Eigen::Index>(j));
      in = in && std::abs(d.real()) <= 3.0 * std::sqrt(st.eigenvalue_variance_real(k)) &&
           std::abs(d.imag()) <= 3.0 * std::sqrt(st.eigenvalue_variance_imag(k));
    }
    out.wins += all;
    out.inside += in;
  }
  return out;
}

struct Setting {
  double sigma;
  Eigen::Index p;
};
constexpr Setting kSettings[] = {{0.001, 20}, {0.005, 20}, {0.01, 50}, {0.05, 50}};
constexpr int kReplicates = 20;

std::vector<ReplicateSummary>& replicate_cache() {
  static std::vector<ReplicateSummary> cache;
  if (cache.empty()) {
    for (const Setting& s : kSettings) {
      cache.push_back(run_replicates(s.sigma, s.p, kReplicates));
    }
  }
  return cache;
}

Outcome bop_beats_opt() {
  const auto& runs = replicate_cache();
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const ReplicateSummary& r = runs[k];
    const bool frequent = r.wins >= 0.6 * kReplicates;
    const bool average = r.bop_err[0] <= r.opt_err[0] && r.bop_err[1] <= r.opt_err[1] &&
                         r.bop_err[2] <= r.opt_err[2];
    pass = pass && frequent && average;
    detail += fmt("\n    sigma %.3f p %ld: wins %d/%d; mean error bop/opt -2: %.3g/%.3g, i: %.3g/%.3g, 1: %.3g/%.3g",
                  kSettings[k].sigma, static_cast<long>(kSettings[k].p), r.wins, kReplicates, r.bop_err[0],
                  r.opt_err[0], r.bop_err[1], r.opt_err[1], r.bop_err[2], r.opt_err[2]);
  }
  return {pass, "need wins >= 12/20 and mean bop <= opt per eigenvalue" + detail};
}

Outcome truth_in_bands() {
  const auto& runs = replicate_cache();
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    pass = pass && runs[k].inside >= 0.9 * kReplicates;
    detail += fmt("%s sigma %.3f: %d/%d", k == 0 ? "" : ";", kSettings[k].sigma, runs[k].inside, kReplicates);
  }
  return {pass, "replicates with all truths inside 3 sd (need >= 18/20):" + detail};
}

Outcome bag_size_plateau() {
  constexpr int reps = 10;
  const std::vector<Eigen::Index> sizes{5, 10, 20, 40, 80};
  std::vector<double> err(sizes.size(), 0.0);
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (int rep = 0; rep < reps; ++rep) {
      const SyntheticDataset ds = toy_dataset({.sigma = 0.005, .seed = static_cast<std::uint64_t>(5000 + rep)});
      BagConfig bag;
      bag.bag_size = sizes[k];
      bag.trials = 100;
      bag.base_seed = static_cast<std::uint64_t>(rep);
      const BopResult res = bop_dmd(ds.data, 3, bag);
      for (double e : matched_errors(res.statistics.eigenvalue_mean, ds.true_omegas)) {
        err[k] += e * e / reps;
      }
    }
  }
  const bool plateau = err[2] <= 2.0 * err[4];
  const bool small_worse = err[0] > err[2];
  return {plateau && small_worse,
          fmt("mean squared error p=5: %.3g, p=10: %.3g, p=20: %.3g, p=40: %.3g, p=80: %.3g; "
              "p20 <= 2 x p80 [%s], p5 > p20 [%s]",
              err[0], err[1], err[2], err[3], err[4], plateau ? "ok" : "not met", small_worse ? "ok" : "not met")};
}

Outcome forecast_accuracy() {
  const SyntheticDataset ds = oscillator_surrogate({.m = 200, .t_min = 0.0, .t_max = 20.0,
                                                    .frequencies = {1.0, 2.3}, .decays = {0.0, 0.0},
                                                    .sigma = 0.01, .seed = 1});
  std::vector<Eigen::Index> train(150);
  std::iota(train.begin(), train.end(), Eigen::Index{0});
  std::vector<Eigen::Index> test(50);
  std::iota(test.begin(), test.end(), Eigen::Index{150});
  const SnapshotMatrix training = ds.data.select_columns(train);
  const SnapshotMatrix future = ds.truth.select_columns(test);

  BagConfig bag;
  bag.bag_size = 30;
  bag.trials = 100;
  bag.base_seed = 1;
  const BopResult res = bop_dmd(training, 4, bag);
  const Forecast fc = forecast(res.statistics, future.times(), 100, 1);
  const double error = relative_error(future.values(), fc.mean);
  const double coverage = coverage_fraction(fc, future.values(), 3.0);
  return {error <= 0.05 && coverage >= 0.85,
          fmt("forecast-mean relative error %.4f (bound 0.05) [%s]; 3-sigma coverage %.3f (need >= 0.85) [%s]",
              error, error <= 0.05 ? "ok" : "not met", coverage, coverage >= 0.85 ? "ok" : "not met")};
}

Eigen::VectorXcd fd_column(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& omegas, const Eigen::VectorXd& times,
                           Eigen::Index j, cdouble direction) {
  const double h = 1e-6;
  Eigen::VectorXcd plus = omegas;
  Eigen::VectorXcd minus = omegas;
  plus(j) += h * direction;
  minus(j) -= h * direction;
  const Eigen::MatrixXcd diff =
      (varpro_cost(x, plus, times, 1e-12).residual - varpro_cost(x, minus, times, 1e-12).residual) / (2.0 * h);
  return Eigen::Map<const Eigen::VectorXcd>(diff.data(), diff.size());
}

Outcome jacobian_correctness() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick_n(1, 10), pick_m(4, 50), pick_r(1, 4);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = pick_n(rng);
    const Eigen::Index m = pick_m(rng);
    const Eigen::Index r = std::min<Eigen::Index>(pick_r(rng), m - 1);
    Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
    for (Eigen::Index k = 1; k + 1 < m; ++k) {
      times(k) += 0.3 * uni(rng) / static_cast<double>(m);
    }
    Eigen::VectorXcd w(r);
    for (Eigen::Index j = 0; j < r; ++j) {
      w(j) = cdouble(uni(rng), 3.0 * static_cast<double>(j) + uni(rng));
    }
    const Eigen::MatrixXcd x = testing::random_complex(n, m, rng);
    const VarproJacobian jac = varpro_jacobian(x, w, times, 1e-12);
    for (Eigen::Index j = 0; j < r; ++j) {
      const Eigen::VectorXcd fd_re = fd_column(x, w, times, j, 1.0);
      const Eigen::VectorXcd fd_im = fd_column(x, w, times, j, cdouble(0.0, 1.0));
      worst = std::max(worst, (jac.d_real.col(j) - fd_re).norm() / fd_re.norm());
      worst = std::max(worst, (jac.d_imag.col(j) - fd_im).norm() / fd_im.norm());
    }
  }
  return {worst <= 1e-4, fmt("worst relative column error over 20 instances %.2e (bound 1e-4)", worst)};
}

Outcome nonuniform_sampling() {
  const SyntheticDataset ds = toy_dataset({.n = 128, .m = 100});
  // Delete 30 interior columns at random; the end points stay.
  std::vector<Eigen::Index> interior(98);
  std::iota(interior.begin(), interior.end(), Eigen::Index{1});
  std::mt19937_64 rng(30);
  std::shuffle(interior.begin(), interior.end(), rng);
  std::vector<Eigen::Index> keep(interior.begin() + 30, interior.end());
  keep.push_back(0);
  keep.push_back(99);
  std::sort(keep.begin(), keep.end());
  const SnapshotMatrix sparse = ds.data.select_columns(keep);

  bool refused = false;
  try {
    exact_dmd(sparse, 3);
  } catch (const Error& e) {
    refused = e.code() == ErrorCode::NonUniformSampling;
  }
  const Eigen::Vector3cd init =
      ds.true_omegas + Eigen::Vector3cd(cdouble(0.3, 0.2), cdouble(-0.2, 0.3), cdouble(-0.25, 0.0));
  const OptimizedFit fit = optimized_dmd(sparse, 3, init);
  const double err = testing::max_of(matched_errors(fit.model.eigenvalues, ds.true_omegas));
  return {refused && err <= 1e-5,
          fmt("%ld of 100 columns kept; exact DMD refused with NonUniformSampling [%s]; "
              "optimized DMD max error %.2e (bound 1e-5)",
              static_cast<long>(keep.size()), refused ? "ok" : "not met", err)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"bopdmd"};
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out;
  std::ostringstream err;
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

bool bits_equal(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(cdouble) * static_cast<std::size_t>(a.size())) == 0;
}

Outcome determinism_and_round_trips() {
  const fs::path dir = fs::temp_directory_path() / ("bopdmd_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto p = [&](const char* name) { return (dir / name).string(); };

  const std::vector<std::vector<std::string>> pipeline{
      {"generate", "toy", "--sigma", "0.01", "--seed", "4", "--out", p("data.csv"), "--truth", p("truth.csv")},
      {"fit", "--method", "exact", "--rank", "3", "--in", p("data.csv"), "--out", p("exact.json")},
      {"fit", "--method", "opt", "--rank", "3", "--in", p("data.csv"), "--out", p("opt.json")},
      {"fit", "--method", "bop", "--rank", "3", "--in", p("data.csv"), "--out", p("bop.json"), "--p", "20", "--k",
       "20", "--seed", "5"},
      {"forecast", "--model", p("bop.json"), "--t-start", "1", "--t-end", "1.5", "--steps", "26", "--draws", "50",
       "--seed", "6", "--out", p("fc.csv"), "--var-out", p("var.csv")},
      {"report", "--model", p("bop.json"), "--truth-omegas", p("omegas.json"), "--out", p("report.json")}};
  const std::vector<const char*> outputs{"data.csv",  "truth.csv", "omegas.json", "exact.json", "opt.json",
                                         "bop.json",  "eigen_stats.csv", "mode_variance.csv", "fc.csv",
                                         "var.csv",   "report.json"};
  bool ran = true;
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& args : pipeline) {
      ran = ran && run_cli(args) == 0;
    }
    std::vector<std::string> now;
    for (const char* f : outputs) {
      now.push_back(slurp(dir / f));
    }
    if (pass == 0) {
      first = std::move(now);
    } else {
      ran = ran && now == first;
    }
  }
  const bool identical = ran && std::none_of(first.begin(), first.end(), [](const auto& s) { return s.empty(); });

  const SnapshotMatrix data = load_csv(dir / "data.csv");
  save_csv(data, dir / "again.csv");
  const SnapshotMatrix again = load_csv(dir / "again.csv");
  const bool csv_ok = bits_equal(again.values(), data.values()) &&
                      bits_equal(again.times().cast<cdouble>(), data.times().cast<cdouble>()) &&
                      slurp(dir / "again.csv") == slurp(dir / "data.csv");

  const ModelArchive archive = load_archive(dir / "bop.json");
  save_archive(archive, dir / "again.json");
  const ModelArchive back = load_archive(dir / "again.json");
  const bool archive_ok = slurp(dir / "again.json") == slurp(dir / "bop.json") &&
                          bits_equal(back.model.modes, archive.model.modes) &&
                          bits_equal(back.ensemble->eigenvalue_mean, archive.ensemble->eigenvalue_mean);

  BagConfig bag;
  bag.bag_size = 20;
  bag.trials = 20;
  bag.base_seed = 5;
  const BopResult mem = bop_dmd(data, 3, bag);
  const Forecast direct = forecast(mem.statistics, Eigen::VectorXd::LinSpaced(26, 1.0, 1.5), 50, 6);
  const Forecast stored = forecast(*archive.ensemble, Eigen::VectorXd::LinSpaced(26, 1.0, 1.5), 50, 6);
  const bool forecast_ok = bits_equal(direct.mean, stored.mean) &&
                           bits_equal(direct.variance.cast<cdouble>(), stored.variance.cast<cdouble>());

  std::error_code ec;
  fs::remove_all(dir, ec);
  return {identical && csv_ok && archive_ok && forecast_ok,
          fmt("CLI outputs byte-identical across runs [%s]; CSV round trip [%s]; archive round trip [%s]; "
              "archived vs in-memory forecast [%s]",
              identical ? "ok" : "not met", csv_ok ? "ok" : "not met", archive_ok ? "ok" : "not met",
              forecast_ok ? "ok" : "not met")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "noise-free recovery", 5.0, noise_free_recovery},
      {2, "de-biasing", 120.0, debiasing},
      {3, "bagged mean beats optimized DMD", 600.0, bop_beats_opt},
      {4, "bag-size plateau", 900.0, bag_size_plateau},
      // Reuses the replicate runs of criterion 3 when both are selected.
      {5, "truth inside uncertainty bands", 600.0, truth_in_bands},
      {6, "forecast accuracy and coverage", 300.0, forecast_accuracy},
      {7, "Jacobian correctness", 30.0, jacobian_correctness},
      {8, "non-uniform sampling", 10.0, nonuniform_sampling},
      {9, "determinism and round trips", 10.0, determinism_and_round_trips},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) {
    selected.insert(std::atoi(argv[k]));
  }

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    std::printf("[%s] criterion %d (%s): %s; %.1fs of %.0fs budget%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
