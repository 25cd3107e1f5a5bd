#include "pgg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "pgg/baseline_ppo.hpp"
#include "pgg/error.hpp"
#include "pgg/tabular.hpp"
#include "pgg/trainer.hpp"

namespace pgg {

namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

struct TabularInstance {
  tabular::Mdp mdp;
  tabular::GuidedPolicy policy;
};

std::vector<TabularInstance> tabular_instances(const VerifyOptions& o) {
  Rng rng(o.seed);
  std::uniform_int_distribution<std::size_t> states(2, 8), actions(2, 4);
  std::uniform_real_distribution<double> gamma(0.0, 2.0), discount(0.5, 0.95);
  std::vector<TabularInstance> out;
  for (std::size_t i = 0; i < o.instances; ++i) {
    const std::size_t S = states(rng), A = actions(rng);
    auto mdp = tabular::random_mdp(S, A, discount(rng), rng);
    auto policy = tabular::random_policy(S, A, gamma(rng), rng);
    out.push_back({std::move(mdp), std::move(policy)});
  }
  return out;
}

std::vector<double> unit_bias(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> b(n);
  double mx = 0.0;
  for (auto& v : b) mx = std::max(mx, std::abs(v = normal(rng)));
  for (auto& v : b) v /= mx;
  return b;
}

void jitter(const ActorCritic& model, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  for (auto p : model.parameters()) {
    for (auto& v : p.mutable_values()) v += normal(rng);
  }
}

// Random minibatch whose stored log-probs and values sit near the model's
// current outputs, so both clipped and unclipped terms occur.
MinibatchData random_minibatch(const ActorCritic& model, std::size_t m, double gamma,
                               double p_drop, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& spec = model.spec();
  MinibatchData mb;
  std::vector<double> obs(m * spec.observation_dim);
  for (auto& v : obs) v = normal(rng);
  mb.obs = Tensor::from({m, spec.observation_dim}, obs);
  NoGradGuard no_grad;
  const Tensor head = guided_logits(model.actor_forward(mb.obs), model.actor_forward_null(), gamma);
  Tensor logp;
  if (spec.discrete) {
    std::uniform_int_distribution<std::size_t> act(0, spec.action_count - 1);
    for (std::size_t i = 0; i < m; ++i) mb.discrete_actions.push_back(act(rng));
    logp = categorical_log_prob(head, mb.discrete_actions);
  } else {
    std::vector<double> a(m * spec.action_dim);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = head.values()[i] + normal(rng);
    mb.continuous_actions = Tensor::from({m, spec.action_dim}, a);
    logp = gaussian_log_prob(head, model.log_std(), mb.continuous_actions);
  }
  const Tensor values = model.critic_forward(mb.obs);
  for (std::size_t i = 0; i < m; ++i) {
    mb.old_log_probs.push_back(logp.values()[i] + 0.3 * (2.0 * unif(rng) - 1.0));
    mb.old_values.push_back(values.values()[i] + 0.3 * (2.0 * unif(rng) - 1.0));
    mb.advantages.push_back(normal(rng));
    mb.returns.push_back(normal(rng));
    mb.drop_mask.push_back(unif(rng) < p_drop ? 1 : 0);
  }
  return mb;
}

std::vector<double> grad_or_zero(const Tensor& t) {
  if (!t.has_grad()) return std::vector<double>(t.numel(), 0.0);
  return {t.grad().begin(), t.grad().end()};
}

}  // namespace

Injection parse_injection(const std::string& name) {
  if (name == "none") return Injection::kNone;
  if (name == "drop-uncond-branch") return Injection::kDropUncondBranch;
  if (name == "biased-advantage") return Injection::kBiasedAdvantage;
  throw Error("inject: unknown fault '" + name +
              "' (expected none, drop-uncond-branch, biased-advantage)");
}

std::string injection_name(Injection injection) {
  switch (injection) {
    case Injection::kNone: return "none";
    case Injection::kDropUncondBranch: return "drop-uncond-branch";
    case Injection::kBiasedAdvantage: return "biased-advantage";
  }
  return "?";
}

GuidanceRule guidance_rule_for(Injection injection) {
  if (injection == Injection::kDropUncondBranch) {
    return [](const Tensor& cond, const Tensor&, double gamma) { return scale(cond, gamma); };
  }
  return [](const Tensor& cond, const Tensor& uncond, double gamma) {
    return guided_logits(cond, uncond, gamma);
  };
}

double finite_difference_error(std::vector<Tensor> params, const std::function<Tensor()>& f,
                               double h) {
  for (auto& p : params) p.zero_grad();
  backward(f());
  std::vector<double> analytic, numeric;
  for (auto& p : params) {
    const auto g = grad_or_zero(p);
    analytic.insert(analytic.end(), g.begin(), g.end());
  }
  NoGradGuard no_grad;
  for (auto& p : params) {
    auto vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double up = f().item();
      vals[i] = orig - h;
      const double down = f().item();
      vals[i] = orig;
      numeric.push_back((up - down) / (2.0 * h));
    }
  }
  double err = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    err = std::max(err, std::abs(analytic[k] - numeric[k]));
    mag = std::max(mag, std::abs(numeric[k]));
  }
  return err / std::max(mag, 1e-8);
}

SuiteResult verify_z_cancellation(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "z-cancellation";
  Rng rng(o.seed + 1);
  for (const auto& inst : tabular_instances(o)) {
    std::vector<double> bias;
    if (o.inject == Injection::kBiasedAdvantage) bias = unit_bias(inst.mdp.num_states, rng);
    const auto c = tabular::z_term_cancellation(inst.mdp, inst.policy, bias);
    r.worst = std::max(r.worst, c.gap);
  }
  r.passed = r.worst < 1e-10;
  r.detail = std::to_string(o.instances) + " instances, max gap " + sci(r.worst) + " (< 1e-10)";
  return r;
}

SuiteResult verify_zero_mean_advantage(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "zero-mean-advantage";
  for (const auto& inst : tabular_instances(o)) {
    for (double v : tabular::expected_advantage_zero(inst.mdp, inst.policy)) {
      r.worst = std::max(r.worst, std::abs(v));
    }
  }
  r.passed = r.worst < 1e-12;
  r.detail = "max |E[A]| " + sci(r.worst) + " (< 1e-12)";
  return r;
}

SuiteResult verify_bias_sensitivity(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "bias-sensitivity";
  Rng rng(o.seed + 2);
  std::size_t monotone = 0, total = 0;
  for (const auto& inst : tabular_instances(o)) {
    if (std::abs(inst.policy.gamma - 1.0) < 1e-3) continue;
    const auto beta = unit_bias(inst.mdp.num_states, rng);
    double prev = tabular::z_term_cancellation(inst.mdp, inst.policy).gap;
    bool ok = prev < 1e-10;
    for (double b : {0.01, 0.1, 1.0}) {
      std::vector<double> bias = beta;
      for (auto& v : bias) v *= b;
      const double gap = tabular::z_term_cancellation(inst.mdp, inst.policy, bias).gap;
      ok = ok && gap > prev;
      prev = gap;
    }
    monotone += ok ? 1 : 0;
    ++total;
  }
  r.passed = total > 0 && monotone == total;
  r.worst = static_cast<double>(total - monotone);
  r.detail = std::to_string(monotone) + "/" + std::to_string(total) +
             " instances with gap(0) < 1e-10 < gap(0.01) < gap(0.1) < gap(1)";
  return r;
}

SuiteResult verify_gaussian_product(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "gaussian-product";
  Rng rng(o.seed + 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> ls(-1.0, 1.0), gamma(0.0, 2.0);
  std::uniform_int_distribution<std::size_t> dims(1, 3);
  for (std::size_t i = 0; i < o.gaussian_points; ++i) {
    const std::size_t d = dims(rng);
    std::vector<double> mc(d), mu(d), s(d), x(d);
    for (std::size_t k = 0; k < d; ++k) {
      mc[k] = normal(rng);
      mu[k] = normal(rng);
      s[k] = ls(rng);
    }
    const double g = gamma(rng);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = g * mc[k] + (1 - g) * mu[k] + 2.0 * std::exp(s[k]) * normal(rng);
    }
    const auto c = gaussian_product_check(mc, mu, s, g, x);
    r.worst = std::max(r.worst, std::abs(c.lhs - c.rhs));
  }
  r.passed = r.worst < 1e-10;
  r.detail = std::to_string(o.gaussian_points) + " points, max |lhs - rhs| " + sci(r.worst) +
             " (< 1e-10)";
  return r;
}

SuiteResult verify_finite_differences(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "finite-difference";
  Rng rng(o.seed + 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> gamma(0.0, 2.0), ls(-1.0, 0.5);
  std::uniform_int_distribution<std::size_t> count(2, 5);
  double worst_cat = 0.0, worst_gauss = 0.0, worst_loss = 0.0;
  for (std::size_t i = 0; i < o.fd_configs; ++i) {
    const double g = gamma(rng);
    // Categorical log pi_hat w.r.t. both branches' logits.
    {
      const std::size_t a = count(rng);
      std::vector<double> c(a), u(a);
      for (auto& v : c) v = 2.0 * normal(rng);
      for (auto& v : u) v = 2.0 * normal(rng);
      const Tensor cond = Tensor::parameter({1, a}, c, "cond");
      const Tensor uncond = Tensor::parameter({1, a}, u, "uncond");
      const std::vector<std::size_t> action{std::uniform_int_distribution<std::size_t>(0, a - 1)(rng)};
      worst_cat = std::max(worst_cat, finite_difference_error({cond, uncond}, [&] {
        return sum(categorical_log_prob(guided_logits(cond, uncond, g), action));
      }));
    }
    // Gaussian log pi_hat w.r.t. both means and the shared log-std.
    {
      const std::size_t d = count(rng) - 1;
      std::vector<double> mc(d), mu(d), s(d), x(d);
      for (std::size_t k = 0; k < d; ++k) {
        mc[k] = normal(rng);
        mu[k] = normal(rng);
        s[k] = ls(rng);
        x[k] = normal(rng);
      }
      const Tensor cm = Tensor::parameter({1, d}, mc, "mu_c");
      const Tensor um = Tensor::parameter({1, d}, mu, "mu_u");
      const Tensor lsd = Tensor::parameter({d}, s, "log_std");
      const Tensor act = Tensor::from({1, d}, x);
      worst_gauss = std::max(worst_gauss, finite_difference_error({cm, um, lsd}, [&] {
        return sum(gaussian_log_prob(guided_logits(cm, um, g), lsd, act));
      }));
    }
    // Full PPO loss w.r.t. every model parameter, discrete and continuous.
    {
      ActorCriticSpec spec;
      spec.hidden = 8;
      spec.observation_dim = 3;
      spec.discrete = (i % 2) == 0;
      spec.action_count = spec.discrete ? 3 : 0;
      spec.action_dim = spec.discrete ? 0 : 2;
      ActorCritic model(spec, rng);
      jitter(model, 0.3, rng);
      TrainConfig config = TrainConfig::defaults_for(spec.discrete ? "cartpole" : "pendulum");
      config.ent_coef = 0.01;
      const MinibatchData mb = random_minibatch(model, 12, g, 0.25, rng);
      const GuidanceRule rule = guidance_rule_for(Injection::kNone);
      worst_loss = std::max(worst_loss, finite_difference_error(model.parameters(), [&] {
        return guided_ppo_loss(model, mb, config, g, rule).total;
      }));
    }
  }
  r.worst = std::max({worst_cat, worst_gauss, worst_loss});
  r.passed = r.worst < 1e-4;
  r.detail = std::to_string(o.fd_configs) + " configs, max rel err: categorical " +
             sci(worst_cat) + ", gaussian " + sci(worst_gauss) + ", ppo loss " + sci(worst_loss) +
             " (< 1e-4)";
  return r;
}

SuiteResult verify_gamma1_reduction(const VerifyOptions& o) {
  SuiteResult r;
  r.name = "gamma1-reduction";
  TrainConfig config = TrainConfig::defaults_for("cartpole");
  config.seed = static_cast<std::int64_t>(o.seed);
  config.gamma_train = 1.0;
  config.p_drop = 0.0;
  PggTrainer guided(config, guidance_rule_for(o.inject));
  VanillaPpo vanilla(config);
  const int iterations = 3;
  std::size_t mismatched = 0;
  for (int it = 0; it < iterations; ++it) {
    guided.run_iteration();
    vanilla.run_iteration();
    const auto gp = guided.model().parameters();
    const auto vp = vanilla.model().parameters();
    // Guided parameters are the vanilla ones plus the trailing null embedding.
    if (gp.size() != vp.size() + 1) throw Error("gamma1-reduction: parameter layouts differ");
    for (std::size_t k = 0; k < vp.size(); ++k) {
      const auto a = gp[k].values();
      const auto b = vp[k].values();
      if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) {
        ++mismatched;
      }
    }
  }
  r.passed = mismatched == 0;
  r.worst = static_cast<double>(mismatched);
  r.detail = std::to_string(iterations) + " cartpole iterations, " + std::to_string(mismatched) +
             " parameter tensors differ bitwise from vanilla PPO";
  return r;
}

SuiteResult verify_gradient_interpolation(const VerifyOptions& o, const std::string& env) {
  SuiteResult r;
  r.name = "gradient-interpolation/" + env;
  TrainConfig config = TrainConfig::defaults_for(env);
  Rng rng(o.seed + 5);
  ActorCritic model(model_spec_for(config, true), rng);
  jitter(model, 0.1, rng);
  const GuidanceRule rule = guidance_rule_for(o.inject);
  double worst = 0.0;
  double min_null = INFINITY;
  for (double g : {0.5, 1.1, 1.5, 2.0}) {
    const MinibatchData mb = random_minibatch(model, 32, g, 0.0, rng);
    for (auto p : model.parameters()) p.zero_grad();
    const LossTerms loss = guided_ppo_loss(model, mb, config, g, rule);
    backward(loss.total);
    const auto dh = grad_or_zero(loss.guided_head);
    const auto dc = grad_or_zero(loss.cond_head);
    const auto du = grad_or_zero(loss.uncond_head);
    const std::size_t cols = loss.guided_head.cols();
    double scale_mag = 1e-12;
    for (double v : dh) scale_mag = std::max(scale_mag, std::abs(v));
    for (std::size_t k = 0; k < dh.size(); ++k) {
      worst = std::max(worst, std::abs(dc[k] - g * dh[k]) / scale_mag);
    }
    for (std::size_t j = 0; j < cols; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < dh.size() / cols; ++i) col += dh[i * cols + j];
      worst = std::max(worst, std::abs(du[j] - (1.0 - g) * col) / scale_mag);
    }
    double null_sq = 0.0;
    for (double v : grad_or_zero(model.null_embedding())) null_sq += v * v;
    min_null = std::min(min_null, std::sqrt(null_sq));
  }
  r.worst = worst;
  r.passed = worst < 1e-10 && min_null > 0.0;
  r.detail = "max relative deviation " + sci(worst) + " (< 1e-10), min null-embedding grad norm " +
             sci(min_null) + " (> 0)";
  return r;
}

std::vector<SuiteResult> run_verify(const VerifyOptions& o) {
  return {verify_z_cancellation(o),
          verify_zero_mean_advantage(o),
          verify_bias_sensitivity(o),
          verify_gaussian_product(o),
          verify_finite_differences(o),
          verify_gamma1_reduction(o),
          verify_gradient_interpolation(o, "cartpole"),
          verify_gradient_interpolation(o, "pendulum")};
}

}  // namespace pgg
