#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>

#include "pgg/config.hpp"
#include "pgg/error.hpp"
#include "pgg/eval.hpp"
#include "pgg/parallel.hpp"
#include "pgg/plot.hpp"
#include "pgg/trainer.hpp"
#include "pgg/verify.hpp"

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& flag, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item));
      } else {
        out.push_back(static_cast<T>(std::stoll(item)));
      }
    } catch (const std::logic_error&) {
      throw pgg::Error(flag + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::int64_t> seed;
  int num_seeds = 5;
  std::optional<double> gamma_train;
  std::optional<double> p_drop;
  std::optional<std::int64_t> stop_timesteps;
  std::vector<std::string> sets;
  std::size_t threads = 1;
};

int cmd_train(const TrainArgs& a) {
  pgg::TrainConfig base = pgg::load_config(a.config);
  pgg::apply_env_overrides(base, pgg::process_env_overrides());
  if (a.seed) base.seed = *a.seed;
  if (a.gamma_train) base.gamma_train = *a.gamma_train;
  if (a.p_drop) base.p_drop = *a.p_drop;
  if (a.stop_timesteps) base.stop_timesteps = *a.stop_timesteps;
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pgg::Error("--set: expected name=value, got '" + kv + "'");
    pgg::set_config_field(base, kv.substr(0, eq), kv.substr(eq + 1));
  }
  base.validate();
  if (a.num_seeds < 1) throw pgg::Error("--num-seeds: must be at least 1");

  const std::filesystem::path out(a.out);
  std::filesystem::create_directories(out);
  std::mutex io;
  pgg::parallel_for(static_cast<std::size_t>(a.num_seeds), a.threads, [&](std::size_t i) {
    pgg::TrainConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::int64_t>(i);
    const auto dir = out / ("seed_" + std::to_string(cfg.seed));
    const auto result = pgg::train(cfg, dir);
    std::lock_guard lock(io);
    std::cout << dir.string() << ": " << result.records.size() << " updates, "
              << result.checkpoints.size() << " checkpoints";
    if (!result.records.empty() && result.records.back().episodic_return) {
      std::cout << ", last return " << *result.records.back().episodic_return;
    }
    std::cout << '\n';
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy gradient guidance: PPO with a learnable unconditional branch"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one run per seed");
  train->add_option("--config", train_args.config, "Config file (name: type = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_args.out, "Output directory; runs go to seed_<n>/")->required();
  train->add_option("--seed", train_args.seed, "First seed (overrides the config)");
  train->add_option("--num-seeds", train_args.num_seeds, "Number of consecutive seeds")
      ->capture_default_str();
  train->add_option("--gamma-train", train_args.gamma_train, "Guidance strength during training");
  train->add_option("--p-drop", train_args.p_drop, "Conditioning dropout probability");
  train->add_option("--stop-timesteps", train_args.stop_timesteps,
                    "Stop early, keeping the total_timesteps lr schedule");
  train->add_option("--set", train_args.sets, "Override any config field, name=value");
  train->add_option("--threads", train_args.threads, "Concurrent seeds (0 = all cores)")
      ->capture_default_str();

  std::string eval_run, eval_out, eval_gammas, eval_ckpts;
  pgg::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints over a gamma sweep");
  eval->add_option("--run", eval_run, "Training output directory")->required();
  eval->add_option("--out", eval_out, "Directory for report.csv and report.json")->required();
  eval->add_option("--gammas", eval_gammas, "Comma-separated gammas (default per env family)");
  eval->add_option("--checkpoints", eval_ckpts, "Comma-separated checkpoint steps (default all)");
  eval->add_option("--episodes", eval_opts.episodes, "Episodes per seed and gamma")
      ->capture_default_str();
  eval->add_flag("--deterministic", eval_opts.deterministic, "Argmax / mean actions");
  eval->add_option("--eval-seed", eval_opts.eval_seed, "Base evaluation seed")->capture_default_str();
  eval->add_option("--threads", eval_opts.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();

  std::vector<std::string> plot_reports;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG charts and tables from reports");
  plot->add_option("--reports", plot_reports, "Report CSV files (space or comma separated)")->required()->delimiter(',');
  plot->add_option("--out", plot_out, "Output directory")->required();

  pgg::VerifyOptions verify_opts;
  std::string inject = "none";
  auto* verify = app.add_subcommand("verify", "Run the oracle and property suites");
  verify->add_option("--inject", inject, "Fault injection: none, drop-uncond-branch, biased-advantage")
      ->capture_default_str();
  verify->add_option("--instances", verify_opts.instances, "Random tabular instances")
      ->capture_default_str();
  verify->add_option("--seed", verify_opts.seed, "Suite seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_args);
    if (*eval) {
      const auto runs = pgg::find_run_dirs(eval_run);
      pgg::SweepSpec sweep;
      const auto probe = pgg::load_config(runs.front() / "config.txt");
      sweep.gammas = eval_gammas.empty()
                         ? pgg::SweepSpec::default_gammas(pgg::env_is_discrete(probe.env))
                         : parse_list<double>("--gammas", eval_gammas);
      sweep.checkpoints = parse_list<std::int64_t>("--checkpoints", eval_ckpts);
      const auto report = pgg::evaluate_runs(runs, sweep, eval_opts);
      std::filesystem::create_directories(eval_out);
      pgg::write_report_csv(report, std::filesystem::path(eval_out) / "report.csv");
      pgg::write_report_json(report, std::filesystem::path(eval_out) / "report.json");
      std::cout << pgg::report_csv_header() << '\n';
      for (const auto& c : report.cells) {
        std::printf("%s,%lld,%g,%.2f,%.2f,%.2f,%zu,%zu\n", c.env.c_str(),
                    static_cast<long long>(c.step), c.gamma, c.mean, c.std, c.ci95, c.n_episodes,
                    c.n_seeds);
      }
      return 0;
    }
    if (*plot) {
      std::vector<std::filesystem::path> paths(plot_reports.begin(), plot_reports.end());
      for (const auto& p : pgg::plot_reports(paths, plot_out)) std::cout << p.string() << '\n';
      return 0;
    }
    if (*verify) {
      verify_opts.inject = pgg::parse_injection(inject);
      bool ok = true;
      for (const auto& r : pgg::run_verify(verify_opts)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
      }
      std::cout << (ok ? "all suites passed" : "some suites failed") << '\n';
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
