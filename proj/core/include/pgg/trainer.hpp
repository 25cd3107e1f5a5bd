#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgg/actor_critic.hpp"
#include "pgg/config.hpp"
#include "pgg/envs.hpp"
#include "pgg/guided.hpp"
#include "pgg/optim.hpp"
#include "pgg/rollout.hpp"

namespace pgg {

// Independent rng streams of one run, all derived from the config seed.
struct RunRngs {
  explicit RunRngs(std::uint64_t seed);

  Rng init;     // parameter initialization
  Rng action;   // action sampling during rollouts
  Rng shuffle;  // minibatch permutation
  Rng dropout;  // conditioning-dropout masks
};

// Steps the vectorized env and applies the configured observation and reward
// normalization. Episode statistics are tracked on raw rewards.
class EnvRunner {
 public:
  explicit EnvRunner(const TrainConfig& config);

  std::size_t num_envs() const { return env_.size(); }
  std::size_t observation_dim() const { return env_.observation_dim(); }
  const ActionSpace& action_space() const { return env_.action_space(); }
  // Current policy input, [N, obs_dim].
  const std::vector<double>& observation() const { return obs_; }

  struct Transition {
    std::vector<double> rewards;  // normalized when enabled
    std::vector<std::uint8_t> dones;
  };
  Transition step(std::span<const double> actions);

  // Raw returns of episodes finished since the last call.
  std::vector<double> take_finished_returns();

  const ObservationNormalizer* obs_normalizer() const {
    return obs_norm_ ? &*obs_norm_ : nullptr;
  }

 private:
  VecEnv env_;
  std::optional<ObservationNormalizer> obs_norm_;
  std::optional<RewardNormalizer> reward_norm_;
  std::vector<double> obs_;
  std::vector<double> finished_;
};

struct TrainLogRecord {
  std::int64_t global_step = 0;
  std::int64_t iteration = 0;
  std::optional<double> episodic_return;  // mean over episodes finished this iteration
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clipfrac = 0.0;
  double learning_rate = 0.0;
  // Smallest pre-clip L2 norm of the null-embedding gradient over the
  // update's minibatches; 0 for models without a null embedding.
  double null_grad_norm_min = 0.0;
  double wall_seconds = 0.0;
};

struct MinibatchData {
  Tensor obs;                                 // [M, obs_dim]
  std::vector<std::size_t> discrete_actions;  // discrete envs
  Tensor continuous_actions;                  // [M, action_dim]
  std::vector<double> old_log_probs;
  std::vector<double> advantages;  // already standardized if enabled
  std::vector<double> returns;
  std::vector<double> old_values;
  // Rows whose actor input is replaced by the null embedding; empty = none.
  std::vector<std::uint8_t> drop_mask;
};

struct LossTerms {
  Tensor total;
  Tensor policy_loss;
  Tensor value_loss;
  Tensor entropy;       // mean guided entropy
  Tensor log_ratio;     // [M]
  Tensor cond_head;     // conditional branch output, [M, head]
  Tensor uncond_head;   // unconditional branch output, [1, head]
  Tensor guided_head;   // [M, head]
};

// Clipped-surrogate PPO loss evaluated on the guided distribution.
LossTerms guided_ppo_loss(const ActorCritic& model, const MinibatchData& batch,
                          const TrainConfig& config, double gamma, const GuidanceRule& rule);

// PPO with policy gradient guidance. Rollouts sample from the guided policy
// at gamma_train and store guided log-probs; updates optimize the clipped
// surrogate of the guided distribution, so gradients reach the conditional
// branch weighted by gamma and the null embedding branch by (1 - gamma).
// With p_drop > 0 the actor input of sampled transitions is replaced by the
// null embedding during updates only.
class PggTrainer {
 public:
  explicit PggTrainer(const TrainConfig& config, GuidanceRule rule = {});

  const TrainConfig& config() const { return config_; }
  ActorCritic& model() { return model_; }
  const ActorCritic& model() const { return model_; }
  Adam& optimizer() { return optimizer_; }
  const Adam& optimizer() const { return optimizer_; }
  RolloutBuffer& buffer() { return buffer_; }
  const EnvRunner& runner() const { return runner_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t iteration() const { return iteration_; }
  bool finished() const;

  void collect_rollout();
  AdvantageEstimate compute_advantages() const;
  TrainLogRecord ppo_update(const AdvantageEstimate& advantages);
  // Learning-rate annealing, rollout, GAE, and update.
  TrainLogRecord run_iteration();

 private:
  TrainConfig config_;
  GuidanceRule rule_;
  RunRngs rngs_;
  ActorCritic model_;
  Adam optimizer_;
  EnvRunner runner_;
  RolloutBuffer buffer_;
  std::int64_t global_step_ = 0;
  std::int64_t iteration_ = 0;
  std::vector<double> pending_returns_;
  std::vector<std::size_t> permutation_;
};

ActorCriticSpec model_spec_for(const TrainConfig& config, bool with_null_embedding = true);
MinibatchData gather_minibatch(const RolloutBuffer& buffer, const AdvantageEstimate& advantages,
                               std::span<const std::size_t> indices, bool discrete,
                               bool norm_adv);

struct TrainResult {
  std::vector<TrainLogRecord> records;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::string> warnings;
};

// Full run. When run_dir is non-empty it receives config.txt, metrics.csv and
// ckpt_<milestone>.bin files; on a failure abort.txt records the diagnostic
// before the error propagates.
TrainResult train(const TrainConfig& config, const std::filesystem::path& run_dir = {},
                  GuidanceRule rule = {});

// metrics.csv header: step,return,policy_loss,value_loss,entropy,approx_kl,clipfrac
std::string metrics_csv_header();
std::string metrics_csv_row(const TrainLogRecord& record);

}  // namespace pgg
