#include "pgg/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "pgg/checkpoint.hpp"
#include "pgg/error.hpp"

namespace pgg {

namespace {

Rng stream(std::uint64_t seed, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), index};
  return Rng(seq);
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

bool any_set(const std::vector<std::uint8_t>& mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

}  // namespace

RunRngs::RunRngs(std::uint64_t seed)
    : init(stream(seed, 0)), action(stream(seed, 1)), shuffle(stream(seed, 2)), dropout(stream(seed, 3)) {}

// ---- EnvRunner ----

EnvRunner::EnvRunner(const TrainConfig& config)
    : env_(config.env, static_cast<std::size_t>(config.num_envs),
           static_cast<std::uint64_t>(config.seed)) {
  if (config.normalize_obs) obs_norm_.emplace(env_.observation_dim());
  if (config.normalize_reward) reward_norm_.emplace(env_.size(), config.discount);
  obs_ = env_.reset();
  if (obs_norm_) obs_norm_->update_and_normalize(obs_, env_.size());
}

EnvRunner::Transition EnvRunner::step(std::span<const double> actions) {
  VecStep s = env_.step(actions);
  for (const auto& r : s.episode_returns) {
    if (r) finished_.push_back(*r);
  }
  obs_ = std::move(s.observations);
  if (obs_norm_) obs_norm_->update_and_normalize(obs_, env_.size());
  if (reward_norm_) reward_norm_->normalize(s.rewards, s.dones);
  return {std::move(s.rewards), std::move(s.dones)};
}

std::vector<double> EnvRunner::take_finished_returns() {
  std::vector<double> out;
  out.swap(finished_);
  return out;
}

// ---- loss ----

ActorCriticSpec model_spec_for(const TrainConfig& config, bool with_null_embedding) {
  auto env = make_env(config.env);
  ActorCriticSpec spec;
  spec.observation_dim = env->observation_dim();
  spec.discrete = env->action_space().discrete;
  spec.action_count = env->action_space().count;
  spec.action_dim = spec.discrete ? 0 : env->action_space().dim();
  spec.with_null_embedding = with_null_embedding;
  return spec;
}

MinibatchData gather_minibatch(const RolloutBuffer& buffer, const AdvantageEstimate& advantages,
                               std::span<const std::size_t> indices, bool discrete,
                               bool norm_adv) {
  const std::size_t m = indices.size();
  const std::size_t od = buffer.obs_dim();
  const std::size_t ad = buffer.action_dim();
  MinibatchData mb;
  std::vector<double> obs(m * od);
  std::vector<double> acts;
  mb.old_log_probs.resize(m);
  mb.advantages.resize(m);
  mb.returns.resize(m);
  mb.old_values.resize(m);
  if (discrete) {
    mb.discrete_actions.resize(m);
  } else {
    acts.resize(m * ad);
  }
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = indices[r];
    std::copy_n(buffer.observations.begin() + i * od, od, obs.begin() + r * od);
    if (discrete) {
      mb.discrete_actions[r] = static_cast<std::size_t>(buffer.actions[i]);
    } else {
      std::copy_n(buffer.actions.begin() + i * ad, ad, acts.begin() + r * ad);
    }
    mb.old_log_probs[r] = buffer.log_probs[i];
    mb.advantages[r] = advantages.advantages[i];
    mb.returns[r] = advantages.returns[i];
    mb.old_values[r] = buffer.values[i];
  }
  mb.obs = Tensor::from({m, od}, std::move(obs));
  if (!discrete) mb.continuous_actions = Tensor::from({m, ad}, std::move(acts));
  if (norm_adv) mb.advantages = standardize(mb.advantages);
  return mb;
}

LossTerms guided_ppo_loss(const ActorCritic& model, const MinibatchData& batch,
                          const TrainConfig& config, double gamma, const GuidanceRule& rule) {
  const std::size_t m = batch.obs.rows();
  const bool discrete = model.spec().discrete;
  LossTerms out;

  const Tensor input = any_set(batch.drop_mask)
                           ? where_rows(batch.drop_mask, batch.obs, model.null_embedding())
                           : batch.obs;
  out.cond_head = model.actor_forward(input);
  out.uncond_head = model.actor_forward_null();
  out.guided_head = rule(out.cond_head, out.uncond_head, gamma);
  const Tensor& head = out.guided_head;

  Tensor new_log_prob;
  Tensor entropy;
  if (discrete) {
    new_log_prob = categorical_log_prob(head, batch.discrete_actions);
    entropy = categorical_entropy(head);
  } else {
    new_log_prob = gaussian_log_prob(head, model.log_std(), batch.continuous_actions);
    entropy = gaussian_entropy(model.log_std());
  }
  const Tensor new_value = model.critic_forward(batch.obs);

  out.log_ratio = sub(new_log_prob, Tensor::from({m}, batch.old_log_probs));
  const Tensor ratio = exp(out.log_ratio);
  const Tensor neg_adv = neg(Tensor::from({m}, batch.advantages));
  const Tensor pg1 = mul(neg_adv, ratio);
  const Tensor pg2 = mul(neg_adv, clamp(ratio, 1.0 - config.clip_coef, 1.0 + config.clip_coef));
  out.policy_loss = mean(maximum(pg1, pg2));

  const Tensor returns = Tensor::from({m}, batch.returns);
  if (config.clip_vloss) {
    const Tensor old_values = Tensor::from({m}, batch.old_values);
    const Tensor unclipped = square(sub(new_value, returns));
    const Tensor clipped =
        add(old_values, clamp(sub(new_value, old_values), -config.clip_coef, config.clip_coef));
    out.value_loss = scale(mean(maximum(unclipped, square(sub(clipped, returns)))), 0.5);
  } else {
    out.value_loss = scale(mean(square(sub(new_value, returns))), 0.5);
  }
  out.entropy = mean(entropy);
  out.total = add(sub(out.policy_loss, scale(out.entropy, config.ent_coef)),
                  scale(out.value_loss, config.vf_coef));
  return out;
}

// ---- PggTrainer ----

PggTrainer::PggTrainer(const TrainConfig& config, GuidanceRule rule)
    : config_(config),
      rule_(rule ? std::move(rule) : GuidanceRule(
                                         [](const Tensor& c, const Tensor& u, double g) {
                                           return guided_logits(c, u, g);
                                         })),
      rngs_(static_cast<std::uint64_t>(config.seed)),
      model_(model_spec_for(config, true), rngs_.init),
      optimizer_(model_.parameters(), AdamOptions{config.learning_rate, 0.9, 0.999, config.adam_eps}),
      runner_(config),
      buffer_(static_cast<std::size_t>(config.num_steps), static_cast<std::size_t>(config.num_envs),
              model_.spec().observation_dim, runner_.action_space().dim()) {
  config_.validate();
  permutation_.resize(buffer_.size());
  std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
}

bool PggTrainer::finished() const {
  return iteration_ >= config_.num_iterations() || global_step_ >= config_.stop_at();
}

void PggTrainer::collect_rollout() {
  if (!buffer_.empty()) throw Error("collect_rollout: buffer is not empty");
  const std::size_t n = runner_.num_envs();
  const std::size_t od = runner_.observation_dim();
  const std::size_t ad = runner_.action_space().dim();
  const bool discrete = model_.spec().discrete;
  const double gamma = config_.gamma_train;

  NoGradGuard no_grad;
  // Parameters are fixed for the whole rollout.
  const Tensor uncond = model_.actor_forward_null();
  std::vector<double> log_std;
  if (!discrete) log_std.assign(model_.log_std().values().begin(), model_.log_std().values().end());

  std::vector<double> actions(n * ad);
  std::vector<double> log_probs(n);
  for (std::size_t t = 0; t < buffer_.num_steps(); ++t) {
    const std::vector<double> obs = runner_.observation();
    const Tensor obs_t = Tensor::from({n, od}, obs);
    const Tensor head = rule_(model_.actor_forward(obs_t), uncond, gamma);
    const Tensor values = model_.critic_forward(obs_t);
    const std::size_t hs = head.cols();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(head.values().begin() + i * hs, head.values().begin() + (i + 1) * hs);
      if (discrete) {
        const Categorical dist(std::move(row));
        const std::size_t a = dist.sample(rngs_.action);
        actions[i] = static_cast<double>(a);
        log_probs[i] = dist.log_prob(a);
      } else {
        const DiagGaussian dist(std::move(row), log_std);
        const auto a = dist.sample(rngs_.action);
        std::copy(a.begin(), a.end(), actions.begin() + i * ad);
        log_probs[i] = dist.log_prob(a);
      }
    }
    const auto tr = runner_.step(actions);
    buffer_.add(obs, actions, tr.rewards, tr.dones, log_probs, values.values());
    global_step_ += static_cast<std::int64_t>(n);
  }
  const Tensor last = model_.critic_forward(Tensor::from({n, od}, runner_.observation()));
  buffer_.set_bootstrap(last.values());
  const auto finished = runner_.take_finished_returns();
  pending_returns_.insert(pending_returns_.end(), finished.begin(), finished.end());
}

AdvantageEstimate PggTrainer::compute_advantages() const {
  return compute_gae(buffer_, config_.discount, config_.gae_lambda);
}

TrainLogRecord PggTrainer::ppo_update(const AdvantageEstimate& advantages) {
  if (!buffer_.full()) throw Error("ppo_update: rollout buffer is not full");
  const std::size_t mb_size = static_cast<std::size_t>(config_.minibatch_size());
  const bool discrete = model_.spec().discrete;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  TrainLogRecord rec;
  rec.null_grad_norm_min = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::int64_t epoch = 0; epoch < config_.update_epochs; ++epoch) {
    std::shuffle(permutation_.begin(), permutation_.end(), rngs_.shuffle);
    for (std::size_t start = 0; start + mb_size <= permutation_.size(); start += mb_size) {
      const std::span<const std::size_t> idx(permutation_.data() + start, mb_size);
      MinibatchData mb = gather_minibatch(buffer_, advantages, idx, discrete, config_.norm_adv);
      if (config_.p_drop > 0.0) {
        mb.drop_mask.assign(mb_size, 0);
        if (config_.dropout_per_minibatch) {
          std::fill(mb.drop_mask.begin(), mb.drop_mask.end(),
                    uniform(rngs_.dropout) < config_.p_drop ? 1 : 0);
        } else {
          for (auto& d : mb.drop_mask) d = uniform(rngs_.dropout) < config_.p_drop ? 1 : 0;
        }
      }
      LossTerms loss;
      try {
        loss = guided_ppo_loss(model_, mb, config_, config_.gamma_train, rule_);
      } catch (const Error& e) {
        throw Error("ppo_update: loss evaluation failed at global step " +
                    std::to_string(global_step_) + ": " + e.what());
      }
      if (!std::isfinite(loss.total.item())) {
        throw Error("ppo_update: non-finite loss at global step " + std::to_string(global_step_) +
                    " (policy " + fmt_double(loss.policy_loss.item()) + ", value " +
                    fmt_double(loss.value_loss.item()) + ")");
      }
      optimizer_.zero_grad();
      backward(loss.total);

      double null_sq = 0.0;
      for (double g : model_.null_embedding().grad()) null_sq += g * g;
      rec.null_grad_norm_min = std::min(rec.null_grad_norm_min, std::sqrt(null_sq));
      optimizer_.step(config_.max_grad_norm);

      double kl = 0.0;
      double clipped = 0.0;
      for (double lr : loss.log_ratio.values()) {
        const double ratio = std::exp(lr);
        kl += (ratio - 1.0) - lr;
        clipped += std::abs(ratio - 1.0) > config_.clip_coef ? 1.0 : 0.0;
      }
      rec.approx_kl += kl / static_cast<double>(mb_size);
      rec.clipfrac += clipped / static_cast<double>(mb_size);
      rec.policy_loss += loss.policy_loss.item();
      rec.value_loss += loss.value_loss.item();
      rec.entropy += loss.entropy.item();
      ++count;
    }
  }
  const double c = static_cast<double>(std::max<std::size_t>(count, 1));
  rec.approx_kl /= c;
  rec.clipfrac /= c;
  rec.policy_loss /= c;
  rec.value_loss /= c;
  rec.entropy /= c;
  buffer_.clear();
  return rec;
}

TrainLogRecord PggTrainer::run_iteration() {
  const auto t0 = std::chrono::steady_clock::now();
  ++iteration_;
  double lr = config_.learning_rate;
  if (config_.anneal_lr) {
    const double frac = 1.0 - static_cast<double>(iteration_ - 1) /
                                  static_cast<double>(config_.num_iterations());
    lr = frac * config_.learning_rate;
  }
  optimizer_.set_learning_rate(lr);
  collect_rollout();
  const AdvantageEstimate adv = compute_advantages();
  TrainLogRecord rec = ppo_update(adv);
  rec.global_step = global_step_;
  rec.iteration = iteration_;
  rec.learning_rate = lr;
  if (!pending_returns_.empty()) {
    rec.episodic_return = std::accumulate(pending_returns_.begin(), pending_returns_.end(), 0.0) /
                          static_cast<double>(pending_returns_.size());
    pending_returns_.clear();
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---- train ----

std::string metrics_csv_header() {
  return "step,return,policy_loss,value_loss,entropy,approx_kl,clipfrac";
}

std::string metrics_csv_row(const TrainLogRecord& r) {
  return std::to_string(r.global_step) + "," +
         (r.episodic_return ? fmt_double(*r.episodic_return) : std::string("nan")) + "," +
         fmt_double(r.policy_loss) + "," + fmt_double(r.value_loss) + "," +
         fmt_double(r.entropy) + "," + fmt_double(r.approx_kl) + "," + fmt_double(r.clipfrac);
}

TrainResult train(const TrainConfig& config, const std::filesystem::path& run_dir,
                  GuidanceRule rule) {
  config.validate();
  TrainResult result;
  if (config.num_iterations() == 0) {
    result.warnings.push_back("total_timesteps (" + std::to_string(config.total_timesteps) +
                              ") is smaller than one rollout (" +
                              std::to_string(config.batch_size()) + "); no updates performed");
    std::cerr << "warning: " << result.warnings.back() << '\n';
  }

  std::ofstream metrics;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    std::ofstream(run_dir / "config.txt") << config.to_text();
    metrics.open(run_dir / "metrics.csv");
    if (!metrics) throw Error("train: cannot write " + (run_dir / "metrics.csv").string());
    metrics << metrics_csv_header() << '\n';
  }

  PggTrainer trainer(config, std::move(rule));
  std::int64_t next_milestone = config.checkpoint_interval;
  try {
    while (!trainer.finished()) {
      TrainLogRecord rec = trainer.run_iteration();
      result.records.push_back(rec);
      if (metrics.is_open()) metrics << metrics_csv_row(rec) << '\n' << std::flush;
      while (trainer.global_step() >= next_milestone) {
        if (!run_dir.empty()) {
          const auto path = run_dir / checkpoint_filename(next_milestone);
          save_checkpoint(path, make_checkpoint(config, trainer.model(), trainer.optimizer(),
                                                trainer.runner().obs_normalizer(),
                                                trainer.global_step(), next_milestone));
          result.checkpoints.push_back(path);
        }
        next_milestone += config.checkpoint_interval;
      }
    }
    // Batch granularity can end the run just short of the last milestone.
    if (!run_dir.empty() && config.num_iterations() > 0 && next_milestone <= config.stop_at() &&
        config.stop_at() - trainer.global_step() < config.batch_size()) {
      const auto path = run_dir / checkpoint_filename(next_milestone);
      save_checkpoint(path, make_checkpoint(config, trainer.model(), trainer.optimizer(),
                                            trainer.runner().obs_normalizer(),
                                            trainer.global_step(), next_milestone));
      result.checkpoints.push_back(path);
    }
  } catch (const Error& e) {
    if (!run_dir.empty()) {
      std::ofstream(run_dir / "abort.txt")
          << "global_step " << trainer.global_step() << "\n" << e.what() << '\n';
    }
    throw;
  }
  return result;
}

}  // namespace pgg
