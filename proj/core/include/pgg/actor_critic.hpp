#pragma once

#include <span>
#include <string>
#include <vector>

#include "pgg/optim.hpp"
#include "pgg/tensor.hpp"

namespace pgg {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Tensor forward(const Tensor& x) const;
};

// in -> hidden -> hidden -> out with tanh between layers, no output activation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden, std::size_t out, double out_gain, Rng& rng,
      const std::string& prefix);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
};

struct ActorCriticSpec {
  std::size_t observation_dim = 0;
  bool discrete = true;
  std::size_t action_count = 0;  // discrete: number of actions
  std::size_t action_dim = 0;    // continuous: action vector length
  std::size_t hidden = 64;
  // Without it the model is the plain reference actor-critic.
  bool with_null_embedding = true;

  std::size_t head_size() const { return discrete ? action_count : action_dim; }
};

// Actor, critic, and the learnable null embedding. The unconditional branch
// pi(a|null) runs the unchanged actor trunk on the null embedding in place of
// an observation, so the embedding is the only parameter the branch adds.
// The critic always sees real observations.
class ActorCritic {
 public:
  // Orthogonal init (gain sqrt(2) hidden, 0.01 policy head, 1.0 value head),
  // zero biases, zero null embedding, zero log-std. Critic layers draw from
  // rng before actor layers.
  ActorCritic(const ActorCriticSpec& spec, Rng& rng);

  const ActorCriticSpec& spec() const { return spec_; }

  // obs [B, obs_dim] -> [B, head]
  Tensor actor_forward(const Tensor& obs) const;
  // [1, head]
  Tensor actor_forward_null() const;
  // obs [B, obs_dim] -> [B]
  Tensor critic_forward(const Tensor& obs) const;

  std::vector<double> actor_forward(std::span<const double> obs) const;
  std::vector<double> actor_forward_null_values() const;
  double critic_forward(std::span<const double> obs) const;

  const Tensor& null_embedding() const;
  const Tensor& log_std() const;  // continuous only
  bool has_null_embedding() const { return null_embedding_.defined(); }

  // Fixed order: critic layers, actor layers, log-std (continuous), null
  // embedding last.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }

 private:
  void check_obs(std::size_t cols) const;

  ActorCriticSpec spec_;
  Mlp actor_;
  Mlp critic_;
  Tensor log_std_;
  Tensor null_embedding_;
};

// Running mean/variance with parallel-update merging (count starts at 1e-4).
class RunningMeanStd {
 public:
  explicit RunningMeanStd(std::size_t dim = 1);

  void update(std::span<const double> batch, std::size_t batch_rows);
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& var() const { return var_; }
  double count() const { return count_; }
  void restore(std::vector<double> mean, std::vector<double> var, double count);

 private:
  std::vector<double> mean_;
  std::vector<double> var_;
  double count_ = 1e-4;
};

// Observation normalization: (obs - mean) / sqrt(var + 1e-8), clipped to
// [-10, 10].
class ObservationNormalizer {
 public:
  explicit ObservationNormalizer(std::size_t dim = 1) : stats_(dim) {}

  // Updates the statistics with the batch, then normalizes it in place.
  void update_and_normalize(std::span<double> batch, std::size_t rows);
  void normalize(std::span<double> batch) const;
  const RunningMeanStd& stats() const { return stats_; }
  RunningMeanStd& stats() { return stats_; }

 private:
  RunningMeanStd stats_;
};

// Scales rewards by the running std of the discounted return, then clips to
// [-10, 10]. One discounted-return accumulator per env.
class RewardNormalizer {
 public:
  RewardNormalizer(std::size_t num_envs = 1, double discount = 0.99);

  void normalize(std::span<double> rewards, std::span<const std::uint8_t> dones);
  const RunningMeanStd& stats() const { return stats_; }
  RunningMeanStd& stats() { return stats_; }

 private:
  RunningMeanStd stats_;
  std::vector<double> returns_;
  double discount_;
};

}  // namespace pgg
