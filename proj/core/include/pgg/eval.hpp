#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pgg/checkpoint.hpp"

namespace pgg {

struct SweepSpec {
  std::vector<double> gammas;
  // Checkpoint milestones to evaluate; empty means every milestone present
  // in all run directories.
  std::vector<std::int64_t> checkpoints;

  static std::vector<double> default_gammas(bool discrete);
};

struct EvalOptions {
  int episodes = 50;
  // Act with argmax logits / the guided mean instead of sampling.
  bool deterministic = false;
  // Base of the evaluation seeds; disjoint from training seeds. Seeds depend
  // only on (run index, episode), so every gamma sees the same initial
  // states and action-noise streams.
  std::uint64_t eval_seed = 1000003;
  std::size_t threads = 1;
};

// Statistics over the pooled episodes of every seed for one (step, gamma).
struct EvalCell {
  std::string env;
  std::int64_t step = 0;
  double gamma = 1.0;
  std::vector<std::vector<double>> returns;  // [seed][episode]
  double mean = 0.0;
  double std = 0.0;   // sample std of pooled returns
  double ci95 = 0.0;  // 1.96 * std / sqrt(n)
  std::size_t n_episodes = 0;
  std::size_t n_seeds = 0;
};

struct EvalReport {
  std::string env;
  std::vector<EvalCell> cells;  // sorted by (step, gamma)

  static constexpr const char* kCiMethod = "pooled normal approximation, 1.96 * sample std / sqrt(n)";

  const EvalCell& cell(std::int64_t step, double gamma) const;
};

struct PooledStats {
  double mean = 0.0;
  double std = 0.0;
  double ci95 = 0.0;
  std::size_t n = 0;
};
PooledStats pooled_stats(const std::vector<std::vector<double>>& returns);

// Episode returns of one policy at one guidance strength. Observations are
// normalized with the frozen checkpoint statistics when present.
std::vector<double> evaluate_policy(const LoadedPolicy& policy, double gamma, int episodes,
                                    std::uint64_t seed, bool deterministic = false);

// Milestones with a ckpt_<step>.bin in the directory, ascending.
std::vector<std::int64_t> list_checkpoints(const std::filesystem::path& run_dir);

// Seed subdirectories (seed_*) of a training output directory, or the
// directory itself if it holds a single run.
std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& root);

// Throws pgg::Error listing the available steps when a requested checkpoint
// is missing from any run.
EvalReport evaluate_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const SweepSpec& sweep, const EvalOptions& options = {});

// report CSV: env,step,gamma,mean,std,ci95,n_episodes,n_seeds
std::string report_csv_header();
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
// Reads cells back from a report CSV (per-episode returns are not stored).
std::vector<EvalCell> read_report_csv(const std::filesystem::path& path);

std::string format_number(double value);

}  // namespace pgg
