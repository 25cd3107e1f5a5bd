#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pgg/optim.hpp"
#include "pgg/tensor.hpp"

namespace pgg {

// Guided policy: pi_hat(a|s) proportional to pi(a|null)^(1-g) * pi(a|s)^g.
// For softmax policies this is softmax(g*cond + (1-g)*uncond), for
// shared-covariance Gaussians it is the Gaussian at g*mu_c + (1-g)*mu_u.
// Guidance strength is never clipped.

std::vector<double> guided_logits(std::span<const double> cond,
                                  std::span<const double> uncond, double gamma);

// Same rule on tensors; `uncond` may be a single row broadcast over the batch.
// Gradients reach cond scaled by gamma and uncond by (1 - gamma).
Tensor guided_logits(const Tensor& cond, const Tensor& uncond, double gamma);

// How the trainer merges branch outputs. Production code uses guided_logits;
// tests swap in mutants.
using GuidanceRule = std::function<Tensor(const Tensor&, const Tensor&, double)>;

class Categorical {
 public:
  explicit Categorical(std::vector<double> logits);

  std::size_t size() const { return logits_.size(); }
  const std::vector<double>& logits() const { return logits_; }
  const std::vector<double>& log_probs() const { return log_probs_; }
  std::vector<double> probs() const;
  double log_prob(std::size_t action) const;
  double entropy() const;
  // Inverse CDF on one uniform draw.
  std::size_t sample(Rng& rng) const;
  std::size_t mode() const;

 private:
  std::vector<double> logits_;
  std::vector<double> log_probs_;
};

class GuidedCategorical {
 public:
  GuidedCategorical(std::vector<double> cond_logits, std::vector<double> uncond_logits,
                    double gamma);

  double gamma() const { return gamma_; }
  const std::vector<double>& cond_logits() const { return cond_; }
  const std::vector<double>& uncond_logits() const { return uncond_; }
  const Categorical& distribution() const { return guided_; }

  std::vector<double> probs() const { return guided_.probs(); }
  double log_prob(std::size_t action) const { return guided_.log_prob(action); }
  double entropy() const { return guided_.entropy(); }
  std::size_t sample(Rng& rng) const { return guided_.sample(rng); }

 private:
  std::vector<double> cond_;
  std::vector<double> uncond_;
  double gamma_;
  Categorical guided_;
};

// Diagonal Gaussian with state-independent log standard deviations.
class DiagGaussian {
 public:
  DiagGaussian(std::vector<double> mean, std::vector<double> log_std);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }
  double log_prob(std::span<const double> x) const;
  double entropy() const;
  std::vector<double> sample(Rng& rng) const;

 private:
  std::vector<double> mean_;
  std::vector<double> log_std_;
};

class GuidedGaussian {
 public:
  GuidedGaussian(std::vector<double> cond_mean, std::vector<double> uncond_mean,
                 std::vector<double> log_std, double gamma);

  double gamma() const { return gamma_; }
  const std::vector<double>& guided_mean() const { return guided_.mean(); }
  const DiagGaussian& distribution() const { return guided_; }

  double log_prob(std::span<const double> x) const { return guided_.log_prob(x); }
  // Depends only on log_std.
  double entropy() const { return guided_.entropy(); }
  std::vector<double> sample(Rng& rng) const { return guided_.sample(rng); }

 private:
  std::vector<double> cond_;
  std::vector<double> uncond_;
  double gamma_;
  DiagGaussian guided_;
};

struct ProductCheck {
  double lhs;  // normalized N(mu_u)^(1-g) N(mu_c)^g at the point
  double rhs;  // N(g*mu_c + (1-g)*mu_u) at the point
};

// Evaluates the powered product of two shared-covariance Gaussians, with its
// normalizer computed in closed form (completing the square per dimension),
// against the mean-interpolated Gaussian.
ProductCheck gaussian_product_check(std::span<const double> cond_mean,
                                    std::span<const double> uncond_mean,
                                    std::span<const double> log_std, double gamma,
                                    std::span<const double> point);

// ---- batched, differentiable forms used by the trainer ----

// logits [B,A] -> [B]
Tensor categorical_log_prob(const Tensor& logits, std::span<const std::size_t> actions);
Tensor categorical_entropy(const Tensor& logits);
// mean [B,D], log_std [D], actions [B,D] -> [B]
Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& actions);
// Scalar entropy of one action distribution (identical for every row).
Tensor gaussian_entropy(const Tensor& log_std);

}  // namespace pgg
