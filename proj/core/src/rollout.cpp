#include "pgg/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "pgg/error.hpp"

namespace pgg {

RolloutBuffer::RolloutBuffer(std::size_t num_steps, std::size_t num_envs, std::size_t obs_dim,
                             std::size_t action_dim)
    : num_steps_(num_steps), num_envs_(num_envs), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (num_steps == 0 || num_envs == 0) throw Error("rollout_buffer: empty dimensions");
  observations.resize(size() * obs_dim);
  actions.resize(size() * action_dim);
  rewards.resize(size());
  dones.resize(size());
  log_probs.resize(size());
  values.resize(size());
}

void RolloutBuffer::add(std::span<const double> obs, std::span<const double> acts,
                        std::span<const double> rews, std::span<const std::uint8_t> dns,
                        std::span<const double> lps, std::span<const double> vals) {
  if (full()) throw Error("rollout_buffer: buffer is full");
  const std::size_t n = num_envs_;
  if (obs.size() != n * obs_dim_ || acts.size() != n * action_dim_ || rews.size() != n ||
      dns.size() != n || lps.size() != n || vals.size() != n) {
    throw Error("rollout_buffer: add() expects one entry per env");
  }
  const std::size_t base = cursor_ * n;
  std::copy(obs.begin(), obs.end(), observations.begin() + base * obs_dim_);
  std::copy(acts.begin(), acts.end(), actions.begin() + base * action_dim_);
  std::copy(rews.begin(), rews.end(), rewards.begin() + base);
  std::copy(dns.begin(), dns.end(), dones.begin() + base);
  std::copy(lps.begin(), lps.end(), log_probs.begin() + base);
  std::copy(vals.begin(), vals.end(), values.begin() + base);
  ++cursor_;
}

void RolloutBuffer::set_bootstrap(std::span<const double> last_values) {
  if (last_values.size() != num_envs_) throw Error("rollout_buffer: bootstrap needs one value per env");
  bootstrap_.assign(last_values.begin(), last_values.end());
}

void RolloutBuffer::clear() {
  cursor_ = 0;
  bootstrap_.clear();
}

AdvantageEstimate compute_gae(const RolloutBuffer& buffer, double discount, double lambda) {
  if (!buffer.full()) throw Error("compute_gae: buffer is not full");
  if (!buffer.has_bootstrap()) throw Error("compute_gae: missing bootstrap values");
  return compute_gae(buffer.rewards, buffer.values, buffer.dones, buffer.bootstrap(),
                     buffer.num_envs(), discount, lambda);
}

AdvantageEstimate compute_gae(std::span<const double> rewards, std::span<const double> values,
                              std::span<const std::uint8_t> dones,
                              std::span<const double> bootstrap, std::size_t num_envs,
                              double discount, double lambda) {
  if (!(discount >= 0.0 && discount <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error("compute_gae: discount and lambda must lie in [0, 1]");
  }
  if (bootstrap.size() != num_envs) throw Error("compute_gae: missing bootstrap values");
  const std::size_t total = rewards.size();
  if (num_envs == 0 || total % num_envs != 0 || values.size() != total || dones.size() != total) {
    throw Error("compute_gae: inconsistent array sizes");
  }
  const std::size_t steps = total / num_envs;
  AdvantageEstimate out;
  out.advantages.assign(total, 0.0);
  out.returns.assign(total, 0.0);
  for (std::size_t e = 0; e < num_envs; ++e) {
    double last = 0.0;
    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t i = t * num_envs + e;
      const double next_value = t + 1 == steps ? bootstrap[e] : values[i + num_envs];
      const double nonterminal = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + discount * next_value * nonterminal - values[i];
      last = delta + discount * lambda * nonterminal * last;
      out.advantages[i] = last;
    }
  }
  for (std::size_t i = 0; i < total; ++i) out.returns[i] = out.advantages[i] + values[i];
  return out;
}

std::vector<double> standardize(std::span<const double> x) {
  if (x.size() < 2) throw Error("standardize: need at least 2 values");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  std::vector<double> out(x.size(), 0.0);
  if (sd <= 1e-8) return out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
  return out;
}

}  // namespace pgg
