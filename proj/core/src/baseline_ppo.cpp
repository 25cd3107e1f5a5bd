#include "pgg/baseline_ppo.hpp"

#include <algorithm>
#include <numeric>

#include "pgg/error.hpp"
#include "pgg/guided.hpp"

namespace pgg {

VanillaPpo::VanillaPpo(const TrainConfig& config)
    : config_(config),
      rngs_(static_cast<std::uint64_t>(config.seed)),
      model_(model_spec_for(config, false), rngs_.init),
      optimizer_(model_.parameters(), AdamOptions{config.learning_rate, 0.9, 0.999, config.adam_eps}),
      runner_(config),
      buffer_(static_cast<std::size_t>(config.num_steps), static_cast<std::size_t>(config.num_envs),
              runner_.observation_dim(), runner_.action_space().dim()) {
  if (config.p_drop != 0.0) throw Error("VanillaPpo: p_drop must be 0");
  order_.resize(buffer_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

void VanillaPpo::rollout() {
  const std::size_t n = runner_.num_envs();
  const std::size_t od = runner_.observation_dim();
  const std::size_t ad = runner_.action_space().dim();
  const bool discrete = model_.spec().discrete;
  NoGradGuard no_grad;
  std::vector<double> actions(n * ad), logp(n);
  for (std::size_t t = 0; t < buffer_.num_steps(); ++t) {
    const std::vector<double> obs = runner_.observation();
    const Tensor x = Tensor::from({n, od}, obs);
    const Tensor logits = model_.actor_forward(x);
    const Tensor v = model_.critic_forward(x);
    const std::size_t hs = logits.cols();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(logits.values().begin() + i * hs,
                              logits.values().begin() + (i + 1) * hs);
      if (discrete) {
        Categorical pi(std::move(row));
        const auto a = pi.sample(rngs_.action);
        actions[i] = static_cast<double>(a);
        logp[i] = pi.log_prob(a);
      } else {
        const auto& ls = model_.log_std().values();
        DiagGaussian pi(std::move(row), std::vector<double>(ls.begin(), ls.end()));
        const auto a = pi.sample(rngs_.action);
        std::copy(a.begin(), a.end(), actions.begin() + i * ad);
        logp[i] = pi.log_prob(a);
      }
    }
    const auto tr = runner_.step(actions);
    buffer_.add(obs, actions, tr.rewards, tr.dones, logp, v.values());
    global_step_ += static_cast<std::int64_t>(n);
  }
  buffer_.set_bootstrap(model_.critic_forward(Tensor::from({n, od}, runner_.observation())).values());
}

void VanillaPpo::update(const AdvantageEstimate& adv) {
  const std::size_t mb = static_cast<std::size_t>(config_.minibatch_size());
  const bool discrete = model_.spec().discrete;
  const double c = config_.clip_coef;
  for (std::int64_t epoch = 0; epoch < config_.update_epochs; ++epoch) {
    std::shuffle(order_.begin(), order_.end(), rngs_.shuffle);
    for (std::size_t start = 0; start + mb <= order_.size(); start += mb) {
      const MinibatchData b = gather_minibatch(
          buffer_, adv, std::span<const std::size_t>(order_.data() + start, mb), discrete,
          config_.norm_adv);
      const Tensor out = model_.actor_forward(b.obs);
      Tensor logp, ent;
      if (discrete) {
        logp = categorical_log_prob(out, b.discrete_actions);
        ent = categorical_entropy(out);
      } else {
        logp = gaussian_log_prob(out, model_.log_std(), b.continuous_actions);
        ent = gaussian_entropy(model_.log_std());
      }
      const Tensor value = model_.critic_forward(b.obs);
      const Tensor ratio = exp(sub(logp, Tensor::from({mb}, b.old_log_probs)));
      const Tensor na = neg(Tensor::from({mb}, b.advantages));
      const Tensor pg = mean(maximum(mul(na, ratio), mul(na, clamp(ratio, 1.0 - c, 1.0 + c))));
      const Tensor ret = Tensor::from({mb}, b.returns);
      Tensor vloss;
      if (config_.clip_vloss) {
        const Tensor old_v = Tensor::from({mb}, b.old_values);
        const Tensor vc = add(old_v, clamp(sub(value, old_v), -c, c));
        vloss = scale(mean(maximum(square(sub(value, ret)), square(sub(vc, ret)))), 0.5);
      } else {
        vloss = scale(mean(square(sub(value, ret))), 0.5);
      }
      const Tensor loss =
          add(sub(pg, scale(mean(ent), config_.ent_coef)), scale(vloss, config_.vf_coef));
      optimizer_.zero_grad();
      backward(loss);
      optimizer_.step(config_.max_grad_norm);
    }
  }
  buffer_.clear();
}

void VanillaPpo::run_iteration() {
  ++iteration_;
  double lr = config_.learning_rate;
  if (config_.anneal_lr) {
    lr *= 1.0 - static_cast<double>(iteration_ - 1) / static_cast<double>(config_.num_iterations());
  }
  optimizer_.set_learning_rate(lr);
  rollout();
  update(compute_gae(buffer_, config_.discount, config_.gae_lambda));
}

}  // namespace pgg
