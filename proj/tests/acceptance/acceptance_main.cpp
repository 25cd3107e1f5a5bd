// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <sys/resource.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pgg/error.hpp"
#include "pgg/eval.hpp"
#include "pgg/tabular.hpp"
#include "pgg/trainer.hpp"
#include "pgg/verify.hpp"

namespace fs = std::filesystem;
using namespace pgg;

namespace {

constexpr std::int64_t kSeeds[] = {1, 2, 3, 4, 5};
constexpr double kCpuBudgetSeconds = 1.5 * 3600.0;

double cpu_seconds() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_utime.tv_sec + u.ru_stime.tv_sec) +
         1e-6 * static_cast<double>(u.ru_utime.tv_usec + u.ru_stime.tv_usec);
}

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  fs::path work_dir;
  std::size_t threads = 1;
  int episodes = 50;
};

// Central-difference gradient of the exact objective, used as an oracle for
// the analytic policy gradient.
std::vector<double> fd_objective_gradient(const tabular::Mdp& mdp, tabular::GuidedPolicy policy) {
  const double h = 1e-6;
  const std::size_t nl = policy.cond_logits.size();
  std::vector<double> out(policy.num_params());
  for (std::size_t k = 0; k < out.size(); ++k) {
    double& theta = k < nl ? policy.cond_logits[k] : policy.uncond_logits[k - nl];
    const double keep = theta;
    theta = keep + h;
    const double up = tabular::objective(mdp, policy);
    theta = keep - h;
    const double down = tabular::objective(mdp, policy);
    theta = keep;
    out[k] = (up - down) / (2 * h);
  }
  return out;
}

Outcome criterion_cancellation(const Context&) {
  VerifyOptions o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = verify_z_cancellation(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // The full gradient must be the true gradient of J for the comparison to
  // mean anything: check it against finite differences on fresh instances.
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> states(2, 8), actions(2, 4);
  std::uniform_real_distribution<double> gamma(0.0, 2.0), discount(0.5, 0.95);
  double fd_err = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t S = states(rng), A = actions(rng);
    const auto mdp = tabular::random_mdp(S, A, discount(rng), rng);
    const auto policy = tabular::random_policy(S, A, gamma(rng), rng);
    const auto analytic = tabular::policy_gradient(mdp, policy);
    const auto fd = fd_objective_gradient(mdp, policy);
    for (std::size_t k = 0; k < fd.size(); ++k) fd_err = std::max(fd_err, std::abs(analytic[k] - fd[k]));
  }
  Outcome out;
  out.passed = suite.passed && secs < 10.0 && fd_err < 1e-6;
  out.detail = suite.detail + ", " + num(secs, 3) + " s (< 10 s), exact gradient vs FD of J " +
               num(fd_err, 3) + " (< 1e-6)";
  return out;
}

Outcome criterion_zero_mean(const Context&) {
  const auto s = verify_zero_mean_advantage(VerifyOptions{});
  return {s.passed, s.detail};
}

Outcome criterion_gamma1(const Context&) {
  VerifyOptions o;
  o.seed = 1;
  const auto s = verify_gamma1_reduction(o);
  return {s.passed, s.detail};
}

Outcome criterion_gaussian(const Context&) {
  const auto s = verify_gaussian_product(VerifyOptions{});
  return {s.passed, s.detail};
}

Outcome criterion_gradients(const Context&) {
  const auto s = verify_finite_differences(VerifyOptions{});
  return {s.passed, s.detail};
}

Outcome criterion_bias(const Context&) {
  const auto s = verify_bias_sensitivity(VerifyOptions{});
  return {s.passed, s.detail};
}

struct SweepRun {
  EvalReport report;
  double cpu_seconds = 0.0;
  std::size_t aborted = 0;
  std::string error;
};

// Trains kSeeds with `base` into work_dir/name and evaluates `gammas` at `step`.
SweepRun train_and_evaluate(const Context& ctx, const std::string& name, const TrainConfig& base,
                            std::int64_t step, const std::vector<double>& gammas) {
  SweepRun out;
  const double c0 = cpu_seconds();
  const fs::path root = ctx.work_dir / name;
  fs::remove_all(root);
  std::vector<fs::path> dirs;
  for (std::int64_t seed : kSeeds) {
    TrainConfig c = base;
    c.seed = seed;
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    try {
      train(c, dir);
    } catch (const Error& e) {
      ++out.aborted;
      out.error = e.what();
      continue;
    }
    if (fs::exists(dir / "abort.txt")) ++out.aborted;
    dirs.push_back(dir);
  }
  if (out.aborted > 0) {
    out.cpu_seconds = cpu_seconds() - c0;
    return out;
  }
  EvalOptions opt;
  opt.episodes = ctx.episodes;
  opt.threads = ctx.threads;
  out.report = evaluate_runs(dirs, SweepSpec{gammas, {step}}, opt);
  write_report_csv(out.report, root / "report.csv");
  write_report_json(out.report, root / "report.json");
  out.cpu_seconds = cpu_seconds() - c0;
  return out;
}

std::string cell_str(const EvalCell& c) {
  return "gamma " + num(c.gamma) + " " + num(c.mean, 5) + " ± " + num(c.ci95, 3);
}

Outcome criterion_cartpole_biased(const Context& ctx) {
  TrainConfig c = TrainConfig::defaults_for("cartpole");
  c.total_timesteps = 500000;
  c.stop_timesteps = 200000;
  c.gamma_train = 1.1;
  const auto run = train_and_evaluate(ctx, "cartpole_gamma_train", c, 200000, {1.0, 2.0});
  if (run.aborted) return {false, std::to_string(run.aborted) + " seeds aborted: " + run.error};
  const auto& g1 = run.report.cell(200000, 1.0);
  const auto& g2 = run.report.cell(200000, 2.0);
  Outcome out;
  out.passed = g2.mean >= 490.0 && g2.mean > g1.mean && run.cpu_seconds <= kCpuBudgetSeconds;
  out.detail = "200k, 5 seeds: " + cell_str(g2) + " (>= 490), " + cell_str(g1) + "; cpu " +
               num(run.cpu_seconds / 3600.0, 3) + " h (<= 1.5 h)";
  return out;
}

Outcome criterion_acrobot(const Context& ctx) {
  TrainConfig c = TrainConfig::defaults_for("acrobot");
  c.total_timesteps = 500000;
  c.stop_timesteps = 100000;
  c.p_drop = 0.1;
  const auto run = train_and_evaluate(ctx, "acrobot_dropout", c, 100000, {1.0, 20.0});
  if (run.aborted) return {false, std::to_string(run.aborted) + " seeds aborted: " + run.error};
  const auto& g1 = run.report.cell(100000, 1.0);
  const auto& g20 = run.report.cell(100000, 20.0);
  Outcome out;
  out.passed = g20.mean - g1.mean >= 10.0 && run.cpu_seconds <= kCpuBudgetSeconds;
  out.detail = "100k, 5 seeds: " + cell_str(g20) + " vs " + cell_str(g1) + ", difference " +
               num(g20.mean - g1.mean) + " (>= 10); cpu " + num(run.cpu_seconds / 3600.0, 3) +
               " h (<= 1.5 h)";
  return out;
}

Outcome criterion_cartpole_dropout(const Context& ctx) {
  TrainConfig c = TrainConfig::defaults_for("cartpole");
  c.total_timesteps = 500000;
  c.stop_timesteps = 100000;
  c.p_drop = 0.1;
  const auto gammas = SweepSpec::default_gammas(true);
  const auto run = train_and_evaluate(ctx, "cartpole_dropout", c, 100000, gammas);
  if (run.aborted) return {false, std::to_string(run.aborted) + " seeds aborted: " + run.error};
  const auto& g1 = run.report.cell(100000, 1.0);
  const auto& g20 = run.report.cell(100000, 20.0);
  std::string sweep;
  bool monotone = true;
  double prev = -INFINITY;
  for (double g : gammas) {
    const auto& cell = run.report.cell(100000, g);
    sweep += (sweep.empty() ? "" : ", ") + num(g) + ":" + num(cell.mean, 4);
    monotone = monotone && cell.mean >= prev;
    prev = cell.mean;
  }
  Outcome out;
  out.passed = g20.mean - g1.mean >= 50.0;
  out.detail = "100k, 5 seeds: gamma 20 minus gamma 1 = " + num(g20.mean - g1.mean) +
               " (>= 50); sweep " + sweep + (monotone ? " (monotone)" : " (not monotone)");
  return out;
}

Outcome criterion_pendulum(const Context& ctx) {
  TrainConfig c = TrainConfig::defaults_for("pendulum");
  c.total_timesteps = 1000000;
  c.gamma_train = 1.1;
  const auto gammas = SweepSpec::default_gammas(false);
  const auto run = train_and_evaluate(ctx, "pendulum_gamma_train", c, 1000000, gammas);
  const bool no_aborts = run.aborted == 0;
  std::string detail = "(a) " + std::to_string(run.aborted) + " aborted runs";
  bool some_beats = false;
  if (no_aborts) {
    const double base = run.report.cell(1000000, 1.0).mean;
    const EvalCell* best = nullptr;
    for (double g : gammas) {
      if (g == 1.0) continue;
      const auto& cell = run.report.cell(1000000, g);
      if (!best || cell.mean > best->mean) best = &cell;
    }
    some_beats = best && best->mean >= base;
    detail += "; (b) gamma 1 " + num(base, 5) + ", best " + cell_str(*best);
  } else {
    detail += ": " + run.error;
  }
  const auto interp = verify_gradient_interpolation(VerifyOptions{}, "pendulum");
  detail += "; (c) " + interp.detail;
  return {no_aborts && some_beats && interp.passed, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Context ctx;
  std::string work_dir = (fs::temp_directory_path() / "pgg_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Directory for training runs and reports");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--threads", ctx.threads, "Evaluation threads");
  CLI11_PARSE(app, argc, argv);
  ctx.work_dir = work_dir;
  fs::create_directories(ctx.work_dir);

  const std::vector<Criterion> criteria = {
      {1, "partition-term cancellation", criterion_cancellation},
      {2, "zero-mean advantage", criterion_zero_mean},
      {3, "gamma=1 reduction", criterion_gamma1},
      {4, "gaussian guidance identity", criterion_gaussian},
      {5, "gradient correctness", criterion_gradients},
      {6, "cartpole gamma_train 1.1 at 200k", criterion_cartpole_biased},
      {7, "acrobot dropout trend at 100k", criterion_acrobot},
      {8, "cartpole dropout gamma benefit at 100k", criterion_cartpole_dropout},
      {9, "pendulum continuous properties", criterion_pendulum},
      {10, "biased-advantage sensitivity", criterion_bias},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += o.passed ? 0 : 1;
    std::printf("criterion %d %s: %s: %s\n", c.id, o.passed ? "PASS" : "FAIL", c.name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
