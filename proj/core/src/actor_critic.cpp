#include "pgg/actor_critic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pgg/error.hpp"

namespace pgg {

Tensor Linear::forward(const Tensor& x) const { return add(matmul(x, weight), bias); }

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out, double out_gain, Rng& rng,
         const std::string& prefix) {
  const std::size_t dims[] = {in, hidden, hidden, out};
  for (std::size_t i = 0; i < 3; ++i) {
    const double gain = i == 2 ? out_gain : std::numbers::sqrt2;
    // Drawn as [out, in] like the reference layers, stored transposed for x*W.
    const auto w = orthogonal_init(dims[i + 1], dims[i], gain, rng);
    std::vector<double> wt(w.size());
    for (std::size_t r = 0; r < dims[i + 1]; ++r) {
      for (std::size_t c = 0; c < dims[i]; ++c) wt[c * dims[i + 1] + r] = w[r * dims[i] + c];
    }
    const std::string name = prefix + "." + std::to_string(i);
    layers_.push_back({Tensor::parameter({dims[i], dims[i + 1]}, std::move(wt), name + ".weight"),
                       Tensor::parameter({dims[i + 1]}, std::vector<double>(dims[i + 1], 0.0),
                                         name + ".bias")});
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = tanh(h);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

ActorCritic::ActorCritic(const ActorCriticSpec& spec, Rng& rng) : spec_(spec) {
  if (spec_.observation_dim == 0 || spec_.head_size() == 0) {
    throw Error("actor_critic: observation and action sizes must be positive");
  }
  critic_ = Mlp(spec_.observation_dim, spec_.hidden, 1, 1.0, rng, "critic");
  actor_ = Mlp(spec_.observation_dim, spec_.hidden, spec_.head_size(), 0.01, rng, "actor");
  if (!spec_.discrete) {
    log_std_ = Tensor::parameter({spec_.action_dim}, std::vector<double>(spec_.action_dim, 0.0),
                                 "actor.log_std");
  }
  if (spec_.with_null_embedding) {
    null_embedding_ = Tensor::parameter(
        {spec_.observation_dim}, std::vector<double>(spec_.observation_dim, 0.0),
        "actor.null_embedding");
  }
}

void ActorCritic::check_obs(std::size_t cols) const {
  if (cols != spec_.observation_dim) {
    throw Error("actor_critic: observation has " + std::to_string(cols) +
                " dims, expected " + std::to_string(spec_.observation_dim));
  }
}

Tensor ActorCritic::actor_forward(const Tensor& obs) const {
  check_obs(obs.cols());
  return actor_.forward(obs.rank() == 2 ? obs : reshape(obs, {1, obs.numel()}));
}

Tensor ActorCritic::actor_forward_null() const {
  return actor_.forward(reshape(null_embedding(), {1, spec_.observation_dim}));
}

Tensor ActorCritic::critic_forward(const Tensor& obs) const {
  check_obs(obs.cols());
  const Tensor v = critic_.forward(obs.rank() == 2 ? obs : reshape(obs, {1, obs.numel()}));
  return reshape(v, {v.rows()});
}

std::vector<double> ActorCritic::actor_forward(std::span<const double> obs) const {
  NoGradGuard guard;
  check_obs(obs.size());
  const Tensor out = actor_forward(Tensor::from({1, obs.size()}, {obs.begin(), obs.end()}));
  return {out.values().begin(), out.values().end()};
}

std::vector<double> ActorCritic::actor_forward_null_values() const {
  NoGradGuard guard;
  const Tensor out = actor_forward_null();
  return {out.values().begin(), out.values().end()};
}

double ActorCritic::critic_forward(std::span<const double> obs) const {
  NoGradGuard guard;
  check_obs(obs.size());
  return critic_forward(Tensor::from({1, obs.size()}, {obs.begin(), obs.end()})).item();
}

const Tensor& ActorCritic::null_embedding() const {
  if (!null_embedding_.defined()) throw Error("actor_critic: model has no null embedding");
  return null_embedding_;
}

const Tensor& ActorCritic::log_std() const {
  if (!log_std_.defined()) throw Error("actor_critic: discrete model has no log_std");
  return log_std_;
}

std::vector<Tensor> ActorCritic::parameters() const {
  std::vector<Tensor> out = critic_.parameters();
  for (auto& p : actor_.parameters()) out.push_back(p);
  if (log_std_.defined()) out.push_back(log_std_);
  if (null_embedding_.defined()) out.push_back(null_embedding_);
  return out;
}

std::size_t ActorCritic::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

// ---- normalization ----

RunningMeanStd::RunningMeanStd(std::size_t dim) : mean_(dim, 0.0), var_(dim, 1.0) {}

void RunningMeanStd::update(std::span<const double> batch, std::size_t batch_rows) {
  const std::size_t d = mean_.size();
  if (batch.size() != batch_rows * d) throw Error("running_mean_std: batch shape mismatch");
  if (batch_rows == 0) return;
  const double n = static_cast<double>(batch_rows);
  for (std::size_t j = 0; j < d; ++j) {
    double bm = 0.0;
    for (std::size_t r = 0; r < batch_rows; ++r) bm += batch[r * d + j];
    bm /= n;
    double bv = 0.0;
    for (std::size_t r = 0; r < batch_rows; ++r) {
      const double e = batch[r * d + j] - bm;
      bv += e * e;
    }
    bv /= n;
    const double delta = bm - mean_[j];
    const double total = count_ + n;
    const double m2 = var_[j] * count_ + bv * n + delta * delta * count_ * n / total;
    mean_[j] += delta * n / total;
    var_[j] = m2 / total;
  }
  count_ += n;
}

void RunningMeanStd::restore(std::vector<double> mean, std::vector<double> var, double count) {
  if (mean.size() != var.size()) throw Error("running_mean_std: restore size mismatch");
  mean_ = std::move(mean);
  var_ = std::move(var);
  count_ = count;
}

void ObservationNormalizer::update_and_normalize(std::span<double> batch, std::size_t rows) {
  stats_.update(batch, rows);
  normalize(batch);
}

void ObservationNormalizer::normalize(std::span<double> batch) const {
  const std::size_t d = stats_.dim();
  if (batch.size() % d != 0) throw Error("observation_normalizer: batch shape mismatch");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t j = i % d;
    const double z = (batch[i] - stats_.mean()[j]) / std::sqrt(stats_.var()[j] + 1e-8);
    batch[i] = std::clamp(z, -10.0, 10.0);
  }
}

RewardNormalizer::RewardNormalizer(std::size_t num_envs, double discount)
    : stats_(1), returns_(num_envs, 0.0), discount_(discount) {}

void RewardNormalizer::normalize(std::span<double> rewards, std::span<const std::uint8_t> dones) {
  if (rewards.size() != returns_.size() || dones.size() != returns_.size()) {
    throw Error("reward_normalizer: expected one reward per env");
  }
  for (std::size_t i = 0; i < returns_.size(); ++i) returns_[i] = returns_[i] * discount_ + rewards[i];
  stats_.update(returns_, returns_.size());
  const double scale = std::sqrt(stats_.var()[0] + 1e-8);
  for (std::size_t i = 0; i < returns_.size(); ++i) {
    rewards[i] = std::clamp(rewards[i] / scale, -10.0, 10.0);
    if (dones[i]) returns_[i] = 0.0;
  }
}

}  // namespace pgg
