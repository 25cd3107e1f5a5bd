#include "pgg/guided.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pgg/error.hpp"

namespace pgg {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

void require_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(op) + ": non-finite input");
  }
}

}  // namespace

std::vector<double> guided_logits(std::span<const double> cond,
                                  std::span<const double> uncond, double gamma) {
  if (cond.size() != uncond.size()) {
    throw Error("guided_logits: length mismatch " + std::to_string(cond.size()) + " vs " +
                std::to_string(uncond.size()));
  }
  require_finite("guided_logits", cond);
  require_finite("guided_logits", uncond);
  std::vector<double> out(cond.size());
  for (std::size_t i = 0; i < cond.size(); ++i) {
    out[i] = gamma * cond[i] + (1.0 - gamma) * uncond[i];
  }
  return out;
}

Tensor guided_logits(const Tensor& cond, const Tensor& uncond, double gamma) {
  return add(scale(cond, gamma), scale(uncond, 1.0 - gamma));
}

// ---- Categorical ----

Categorical::Categorical(std::vector<double> logits) : logits_(std::move(logits)) {
  if (logits_.empty()) throw Error("categorical: empty logits");
  require_finite("categorical", logits_);
  const double mx = *std::max_element(logits_.begin(), logits_.end());
  double s = 0.0;
  for (double l : logits_) s += std::exp(l - mx);
  const double lse = mx + std::log(s);
  log_probs_.resize(logits_.size());
  for (std::size_t i = 0; i < logits_.size(); ++i) log_probs_[i] = logits_[i] - lse;
}

std::vector<double> Categorical::probs() const {
  std::vector<double> p(log_probs_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_probs_[i]);
  return p;
}

double Categorical::log_prob(std::size_t action) const {
  if (action >= log_probs_.size()) {
    throw Error("log_prob: action " + std::to_string(action) + " out of range for " +
                std::to_string(log_probs_.size()) + " actions");
  }
  return log_probs_[action];
}

double Categorical::entropy() const {
  double h = 0.0;
  for (double lp : log_probs_) h -= std::exp(lp) * lp;
  return h;
}

std::size_t Categorical::sample(Rng& rng) const {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cdf = 0.0;
  for (std::size_t i = 0; i < log_probs_.size(); ++i) {
    cdf += std::exp(log_probs_[i]);
    if (u < cdf) return i;
  }
  // u landed in the rounding gap above the accumulated mass.
  for (std::size_t i = log_probs_.size(); i-- > 0;) {
    if (std::exp(log_probs_[i]) > 0.0) return i;
  }
  return log_probs_.size() - 1;
}

std::size_t Categorical::mode() const {
  return static_cast<std::size_t>(
      std::max_element(logits_.begin(), logits_.end()) - logits_.begin());
}

GuidedCategorical::GuidedCategorical(std::vector<double> cond_logits,
                                     std::vector<double> uncond_logits, double gamma)
    : cond_(std::move(cond_logits)),
      uncond_(std::move(uncond_logits)),
      gamma_(gamma),
      guided_(guided_logits(cond_, uncond_, gamma)) {}

// ---- Gaussian ----

DiagGaussian::DiagGaussian(std::vector<double> mean, std::vector<double> log_std)
    : mean_(std::move(mean)), log_std_(std::move(log_std)) {
  if (mean_.size() != log_std_.size()) {
    throw Error("gaussian: mean has " + std::to_string(mean_.size()) + " dims, log_std " +
                std::to_string(log_std_.size()));
  }
  require_finite("gaussian", mean_);
  require_finite("gaussian", log_std_);
}

double DiagGaussian::log_prob(std::span<const double> x) const {
  if (x.size() != mean_.size()) {
    throw Error("log_prob: action has " + std::to_string(x.size()) + " dims, expected " +
                std::to_string(mean_.size()));
  }
  require_finite("log_prob", x);
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - mean_[i]) * std::exp(-log_std_[i]);
    lp += -0.5 * (z * z) - log_std_[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

double DiagGaussian::entropy() const {
  double h = 0.0;
  for (double ls : log_std_) h += 0.5 + 0.5 * kLog2Pi + ls;
  return h;
}

std::vector<double> DiagGaussian::sample(Rng& rng) const {
  std::vector<double> out(mean_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::normal_distribution<double> normal(0.0, 1.0);
    out[i] = mean_[i] + std::exp(log_std_[i]) * normal(rng);
  }
  return out;
}

GuidedGaussian::GuidedGaussian(std::vector<double> cond_mean, std::vector<double> uncond_mean,
                               std::vector<double> log_std, double gamma)
    : cond_(std::move(cond_mean)),
      uncond_(std::move(uncond_mean)),
      gamma_(gamma),
      guided_(guided_logits(cond_, uncond_, gamma), std::move(log_std)) {}

ProductCheck gaussian_product_check(std::span<const double> cond_mean,
                                    std::span<const double> uncond_mean,
                                    std::span<const double> log_std, double gamma,
                                    std::span<const double> point) {
  const std::size_t d = point.size();
  if (cond_mean.size() != d || uncond_mean.size() != d || log_std.size() != d) {
    throw Error("gaussian_product_check: dimension mismatch");
  }
  // Per dimension, (1-g)*log N(x; mu_u) + g*log N(x; mu_c) is a quadratic in x
  // with leading coefficient -1/(2 s^2). Its integral over x is
  // sqrt(2 pi) s * exp(c0 + m^2/(2 s^2)) where m/s^2 is the linear coefficient
  // and c0 the constant term, which gives the closed-form normalizer.
  double log_lhs = 0.0;
  double log_rhs = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double var = std::exp(2.0 * log_std[i]);
    auto log_normal = [&](double x, double mu) {
      return -0.5 * (x - mu) * (x - mu) / var - log_std[i] - 0.5 * kLog2Pi;
    };
    const double x = point[i];
    const double unnorm =
        (1.0 - gamma) * log_normal(x, uncond_mean[i]) + gamma * log_normal(x, cond_mean[i]);
    const double lin = (1.0 - gamma) * uncond_mean[i] + gamma * cond_mean[i];  // = m
    const double c0 = (1.0 - gamma) * log_normal(0.0, uncond_mean[i]) +
                      gamma * log_normal(0.0, cond_mean[i]);
    const double log_z = 0.5 * kLog2Pi + log_std[i] + c0 + 0.5 * lin * lin / var;
    log_lhs += unnorm - log_z;

    const double mu = gamma * cond_mean[i] + (1.0 - gamma) * uncond_mean[i];
    log_rhs += log_normal(x, mu);
  }
  return {std::exp(log_lhs), std::exp(log_rhs)};
}

// ---- batched ----

Tensor categorical_log_prob(const Tensor& logits, std::span<const std::size_t> actions) {
  return gather(log_softmax(logits), actions);
}

Tensor categorical_entropy(const Tensor& logits) {
  const Tensor logp = log_softmax(logits);
  return neg(sum_last(mul(exp(logp), logp)));
}

Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& actions) {
  const Tensor z = mul(sub(actions, mean), exp(neg(log_std)));
  const Tensor per_dim = add_scalar(sub(scale(square(z), -0.5), log_std), -0.5 * kLog2Pi);
  return sum_last(per_dim);
}

Tensor gaussian_entropy(const Tensor& log_std) {
  return add_scalar(sum(log_std),
                    static_cast<double>(log_std.numel()) * (0.5 + 0.5 * kLog2Pi));
}

}  // namespace pgg
