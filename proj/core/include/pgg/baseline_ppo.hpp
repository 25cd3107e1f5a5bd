#pragma once

#include <cstdint>
#include <vector>

#include "pgg/actor_critic.hpp"
#include "pgg/config.hpp"
#include "pgg/optim.hpp"
#include "pgg/rollout.hpp"
#include "pgg/trainer.hpp"

namespace pgg {

// Plain PPO without a null embedding or guidance, written as a separate loop.
// It shares the rng discipline of PggTrainer (same streams, same draw order),
// so a guided run at gamma 1 without dropout must match it bit for bit.
class VanillaPpo {
 public:
  explicit VanillaPpo(const TrainConfig& config);

  const ActorCritic& model() const { return model_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t iteration() const { return iteration_; }

  // One annealed-lr iteration: rollout, GAE, clipped-surrogate epochs.
  void run_iteration();

 private:
  void rollout();
  void update(const AdvantageEstimate& adv);

  TrainConfig config_;
  RunRngs rngs_;
  ActorCritic model_;
  Adam optimizer_;
  EnvRunner runner_;
  RolloutBuffer buffer_;
  std::vector<std::size_t> order_;
  std::int64_t global_step_ = 0;
  std::int64_t iteration_ = 0;
};

}  // namespace pgg
