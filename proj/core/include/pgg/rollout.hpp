#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pgg {

// On-policy storage laid out step-major: entry (t, e) lives at t * num_envs + e.
// dones[t, e] marks that the episode ended on transition t, so V(s_{t+1}) is
// not bootstrapped across it.
class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t num_steps, std::size_t num_envs, std::size_t obs_dim,
                std::size_t action_dim);

  std::size_t num_steps() const { return num_steps_; }
  std::size_t num_envs() const { return num_envs_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t size() const { return num_steps_ * num_envs_; }
  std::size_t filled_steps() const { return cursor_; }
  bool full() const { return cursor_ == num_steps_; }
  bool empty() const { return cursor_ == 0; }

  // One lockstep step for all envs. `log_probs` are the behavior
  // (guided) log-probabilities of the stored actions.
  void add(std::span<const double> obs, std::span<const double> actions,
           std::span<const double> rewards, std::span<const std::uint8_t> dones,
           std::span<const double> log_probs, std::span<const double> values);
  void set_bootstrap(std::span<const double> last_values);
  bool has_bootstrap() const { return !bootstrap_.empty(); }
  void clear();

  std::vector<double> observations;  // [T*N, obs_dim]
  std::vector<double> actions;       // [T*N, action_dim]
  std::vector<double> rewards;       // [T*N]
  std::vector<std::uint8_t> dones;   // [T*N]
  std::vector<double> log_probs;     // [T*N]
  std::vector<double> values;        // [T*N]
  const std::vector<double>& bootstrap() const { return bootstrap_; }

 private:
  std::size_t num_steps_, num_envs_, obs_dim_, action_dim_;
  std::size_t cursor_ = 0;
  std::vector<double> bootstrap_;  // V(s_T) per env
};

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// Backward GAE recursion, cut at episode boundaries.
AdvantageEstimate compute_gae(const RolloutBuffer& buffer, double discount, double lambda);

// Same recursion on raw arrays; `rewards`, `values`, `dones` are [T*N]
// step-major and `bootstrap` is [N].
AdvantageEstimate compute_gae(std::span<const double> rewards, std::span<const double> values,
                              std::span<const std::uint8_t> dones,
                              std::span<const double> bootstrap, std::size_t num_envs,
                              double discount, double lambda);

// Zero mean, unit population std. Input whose std is at most 1e-8 maps to
// zeros.
std::vector<double> standardize(std::span<const double> x);

}  // namespace pgg
