#include "pgg/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pgg/envs.hpp"
#include "pgg/error.hpp"
#include "pgg/guided.hpp"
#include "pgg/parallel.hpp"

namespace pgg {

std::vector<double> SweepSpec::default_gammas(bool discrete) {
  if (discrete) return {1.0, 1.5, 2.0, 5.0, 10.0, 20.0};
  return {1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.5};
}

const EvalCell& EvalReport::cell(std::int64_t step, double gamma) const {
  for (const auto& c : cells) {
    if (c.step == step && c.gamma == gamma) return c;
  }
  throw Error("report: no cell for step " + std::to_string(step) + ", gamma " +
              format_number(gamma));
}

std::string format_number(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, p);
}

PooledStats pooled_stats(const std::vector<std::vector<double>>& returns) {
  PooledStats s;
  double total = 0.0;
  for (const auto& r : returns) {
    for (double v : r) total += v;
    s.n += r.size();
  }
  if (s.n == 0) return s;
  s.mean = total / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const auto& r : returns)
      for (double v : r) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.ci95 = 1.96 * s.std / std::sqrt(static_cast<double>(s.n));
  return s;
}

std::vector<double> evaluate_policy(const LoadedPolicy& policy, double gamma, int episodes,
                                    std::uint64_t seed, bool deterministic) {
  auto env = make_env(policy.config.env);
  const bool discrete = env->action_space().discrete;
  const std::vector<double> uncond = policy.model.actor_forward_null_values();
  std::vector<double> log_std;
  if (!discrete) {
    const auto ls = policy.model.log_std().values();
    log_std.assign(ls.begin(), ls.end());
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t ep_seed = seed + static_cast<std::uint64_t>(e);
    std::seed_seq seq{static_cast<std::uint32_t>(ep_seed), static_cast<std::uint32_t>(ep_seed >> 32),
                      0x5eedu};
    Rng rng(seq);
    std::vector<double> obs = env->reset(ep_seed);
    double total = 0.0;
    while (true) {
      if (policy.obs_norm) policy.obs_norm->normalize(obs);
      const auto head = guided_logits(policy.model.actor_forward(obs), uncond, gamma);
      std::vector<double> action;
      if (discrete) {
        const Categorical dist(head);
        action = {static_cast<double>(deterministic ? dist.mode() : dist.sample(rng))};
      } else {
        action = deterministic ? head : DiagGaussian(head, log_std).sample(rng);
      }
      StepResult r = env->step(action);
      total += r.reward;
      if (r.done()) break;
      obs = std::move(r.observation);
    }
    out.push_back(total);
  }
  return out;
}

std::vector<std::int64_t> list_checkpoints(const std::filesystem::path& run_dir) {
  std::vector<std::int64_t> steps;
  if (!std::filesystem::is_directory(run_dir)) return steps;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (!name.starts_with("ckpt_") || !name.ends_with(".bin")) continue;
    const std::string digits = name.substr(5, name.size() - 9);
    std::int64_t step = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), step);
    if (ec == std::errc() && p == digits.data() + digits.size()) steps.push_back(step);
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw Error("eval: run directory '" + root.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().starts_with("seed_")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty() && std::filesystem::exists(root / "config.txt")) dirs.push_back(root);
  if (dirs.empty()) throw Error("eval: no runs found under '" + root.string() + "'");
  return dirs;
}

EvalReport evaluate_runs(const std::vector<std::filesystem::path>& run_dirs,
                         const SweepSpec& sweep, const EvalOptions& options) {
  if (run_dirs.empty()) throw Error("eval: no run directories");
  if (sweep.gammas.empty()) throw Error("eval: empty gamma list");
  for (double g : sweep.gammas) {
    if (!std::isfinite(g)) throw Error("eval: gamma values must be finite");
  }
  if (options.episodes <= 0) throw Error("eval: episodes must be positive");

  std::vector<std::int64_t> steps = sweep.checkpoints;
  if (steps.empty()) {
    std::set<std::int64_t> common;
    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
      const auto s = list_checkpoints(run_dirs[i]);
      if (i == 0) {
        common.insert(s.begin(), s.end());
      } else {
        std::set<std::int64_t> keep;
        for (auto v : s)
          if (common.contains(v)) keep.insert(v);
        common = std::move(keep);
      }
    }
    steps.assign(common.begin(), common.end());
    if (steps.empty()) throw Error("eval: no checkpoint is present in every run");
  }
  for (const auto& dir : run_dirs) {
    const auto available = list_checkpoints(dir);
    for (auto step : steps) {
      if (std::find(available.begin(), available.end(), step) == available.end()) {
        std::string list;
        for (auto a : available) list += (list.empty() ? "" : ", ") + std::to_string(a);
        throw Error("eval: checkpoint step " + std::to_string(step) + " missing in '" +
                    dir.string() + "'; available steps: [" + list + "]");
      }
    }
  }

  // policies[s * runs + r]
  std::vector<LoadedPolicy> policies;
  for (auto step : steps)
    for (const auto& dir : run_dirs) policies.push_back(load_policy(dir / checkpoint_filename(step)));

  EvalReport report;
  report.env = policies.front().config.env;
  for (const auto& p : policies) {
    if (p.config.env != report.env) throw Error("eval: runs mix environments");
  }
  const std::size_t runs = run_dirs.size();
  std::vector<double> gammas = sweep.gammas;
  std::sort(gammas.begin(), gammas.end());
  for (auto step : steps) {
    for (double g : gammas) {
      EvalCell c;
      c.env = report.env;
      c.step = step;
      c.gamma = g;
      c.returns.resize(runs);
      report.cells.push_back(std::move(c));
    }
  }
  std::sort(report.cells.begin(), report.cells.end(), [](const EvalCell& a, const EvalCell& b) {
    return std::tie(a.step, a.gamma) < std::tie(b.step, b.gamma);
  });

  const std::size_t jobs = report.cells.size() * runs;
  parallel_for(jobs, options.threads, [&](std::size_t job) {
    EvalCell& c = report.cells[job / runs];
    const std::size_t r = job % runs;
    const std::size_t s = static_cast<std::size_t>(
        std::find(steps.begin(), steps.end(), c.step) - steps.begin());
    c.returns[r] = evaluate_policy(policies[s * runs + r], c.gamma, options.episodes,
                                   options.eval_seed + 100000 * r, options.deterministic);
  });
  for (auto& c : report.cells) {
    const auto st = pooled_stats(c.returns);
    c.mean = st.mean;
    c.std = st.std;
    c.ci95 = st.ci95;
    c.n_episodes = st.n;
    c.n_seeds = runs;
  }
  return report;
}

std::string report_csv_header() { return "env,step,gamma,mean,std,ci95,n_episodes,n_seeds"; }

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("eval: cannot write " + path.string());
  out << report_csv_header() << '\n';
  for (const auto& c : report.cells) {
    out << c.env << ',' << c.step << ',' << format_number(c.gamma) << ',' << format_number(c.mean)
        << ',' << format_number(c.std) << ',' << format_number(c.ci95) << ',' << c.n_episodes
        << ',' << c.n_seeds << '\n';
  }
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["env"] = report.env;
  j["ci_method"] = EvalReport::kCiMethod;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) {
    j["cells"].push_back({{"step", c.step},
                          {"gamma", c.gamma},
                          {"mean", c.mean},
                          {"std", c.std},
                          {"ci95", c.ci95},
                          {"n_episodes", c.n_episodes},
                          {"n_seeds", c.n_seeds},
                          {"returns", c.returns}});
  }
  std::ofstream out(path);
  if (!out) throw Error("eval: cannot write " + path.string());
  out << j.dump(1) << '\n';
}

std::vector<EvalCell> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("report: cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != report_csv_header()) {
    throw Error("report: " + path.string() + " does not start with '" + report_csv_header() + "'");
  }
  std::vector<EvalCell> cells;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) {
      throw Error("report: " + path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    }
    try {
      EvalCell c;
      c.env = f[0];
      c.step = std::stoll(f[1]);
      c.gamma = std::stod(f[2]);
      c.mean = std::stod(f[3]);
      c.std = std::stod(f[4]);
      c.ci95 = std::stod(f[5]);
      c.n_episodes = std::stoull(f[6]);
      c.n_seeds = std::stoull(f[7]);
      cells.push_back(std::move(c));
    } catch (const std::logic_error&) {
      throw Error("report: " + path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return cells;
}

}  // namespace pgg
