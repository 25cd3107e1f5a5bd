#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pgg/error.hpp"
#include "pgg/tabular.hpp"

using namespace pgg;
using namespace pgg::tabular;

namespace {

Mdp single_state(double reward, double discount) {
  Mdp m;
  m.num_states = 1;
  m.num_actions = 2;
  m.transitions = {1.0, 1.0};
  m.rewards = {reward, reward};
  m.discount = discount;
  m.initial = {1.0};
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double max_abs(const std::vector<double>& a) {
  double d = 0.0;
  for (double v : a) d = std::max(d, std::abs(v));
  return d;
}

}  // namespace

TEST(Tabular, ZeroRewardsGiveZeroValues) {
  Rng rng(1);
  auto m = random_mdp(4, 3, 0.9, rng);
  std::fill(m.rewards.begin(), m.rewards.end(), 0.0);
  const auto p = random_policy(4, 3, 1.2, rng);
  const auto v = exact_q_v(m, p.probs());
  for (double x : v.v) EXPECT_EQ(x, 0.0);
  for (double x : v.q) EXPECT_EQ(x, 0.0);
  const auto c = z_term_cancellation(m, p);
  EXPECT_EQ(max_abs(c.full_grad), 0.0);
  EXPECT_EQ(c.gap, 0.0);
}

TEST(Tabular, SingleStateValueIsGeometricSum) {
  const auto m = single_state(1.0, 0.9);
  const auto v = exact_q_v(m, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(v.v[0], 10.0, 1e-12);
}

TEST(Tabular, HandComputedValue) {
  const std::vector<double> q{1.0, 0.0}, probs{0.7, 0.3};
  Values vals{q, {0.7}};
  EXPECT_NEAR(0.7 * 1.0 + 0.3 * 0.0, vals.v[0], 1e-15);
  const auto ea = expected_advantage(vals, probs, 2);
  EXPECT_NEAR(ea[0], 0.0, 1e-15);
}

TEST(Tabular, ValuesMatchMonteCarlo) {
  Rng rng(3);
  const auto m = random_mdp(5, 3, 0.8, rng);
  const auto p = random_policy(5, 3, 1.5, rng);
  const auto probs = p.probs();
  const auto exact = exact_q_v(m, probs);
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](const double* w, std::size_t n) {
    double x = u(g), acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += w[i];
      if (x < acc) return i;
    }
    return n - 1;
  };
  const std::size_t horizon = 100;  // 0.8^100 ~ 2e-10
  const std::size_t episodes = 1000000 / horizon;
  const std::size_t s0 = 2;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = s0;
    double ret = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t a = draw(&probs[s * 3], 3);
      ret += disc * m.r(s, a);
      disc *= m.discount;
      s = draw(&m.transitions[(s * 3 + a) * 5], 5);
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double n = static_cast<double>(episodes);
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
  EXPECT_LT(std::abs(mean - exact.v[s0]), 3.0 * se);
}

TEST(Tabular, LogPartitionGradientMatchesFiniteDifference) {
  Rng rng(4);
  for (double g : {0.5, 1.0, 1.7}) {
    auto p = random_policy(3, 4, g, rng);
    for (std::size_t s = 0; s < 3; ++s) {
      const auto analytic = p.grad_log_z(s);
      const double h = 1e-6;
      for (std::size_t k = 0; k < p.num_params(); ++k) {
        double& theta = k < 12 ? p.cond_logits[k] : p.uncond_logits[k - 12];
        const double keep = theta;
        theta = keep + h;
        const double up = p.log_z(s);
        theta = keep - h;
        const double down = p.log_z(s);
        theta = keep;
        EXPECT_NEAR(analytic[k], (up - down) / (2 * h), 1e-6);
      }
    }
  }
}

TEST(Tabular, PolicyGradientMatchesFiniteDifferenceOfObjective) {
  Rng rng(5);
  for (double g : {0.8, 1.0, 1.3}) {
    const auto m = random_mdp(4, 3, 0.9, rng);
    auto p = random_policy(4, 3, g, rng);
    const auto grad = policy_gradient(m, p);
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.num_params(); ++k) {
      double& theta = k < 12 ? p.cond_logits[k] : p.uncond_logits[k - 12];
      const double keep = theta;
      theta = keep + h;
      const double up = objective(m, p);
      theta = keep - h;
      const double down = objective(m, p);
      theta = keep;
      EXPECT_NEAR(grad[k], (up - down) / (2 * h), 1e-6) << "gamma " << g << " k " << k;
    }
  }
}

TEST(Tabular, PartitionTermCancelsAtAndAwayFromOne) {
  Rng rng(6);
  for (double g : {1.0, 1.3}) {
    for (int i = 0; i < 20; ++i) {
      const auto m = random_mdp(5, 4, 0.95, rng);
      const auto p = random_policy(5, 4, g, rng);
      EXPECT_LT(z_term_cancellation(m, p).gap, 1e-10);
    }
  }
}

TEST(Tabular, BiasBreaksCancellationLinearly) {
  Rng rng(7);
  const auto m = random_mdp(4, 3, 0.9, rng);
  const auto p = random_policy(4, 3, 1.5, rng);
  const std::vector<double> unit{1.0, -0.5, 0.25, 0.8};
  auto scaled = [&](double c) {
    std::vector<double> b(unit);
    for (auto& x : b) x *= c;
    return z_term_cancellation(m, p, b).gap;
  };
  const double g1 = scaled(0.01), g2 = scaled(0.1), g3 = scaled(1.0);
  EXPECT_GT(g1, 1e-10);
  EXPECT_NEAR(g2 / g1, 10.0, 1e-6);
  EXPECT_NEAR(g3 / g2, 10.0, 1e-6);
}

TEST(Tabular, ExpectedAdvantageZeroOnlyUnderOwnPolicy) {
  Rng rng(8);
  const auto m = random_mdp(4, 3, 0.9, rng);
  const auto p = random_policy(4, 3, 1.2, rng);
  EXPECT_LT(max_abs(expected_advantage_zero(m, p)), 1e-12);
  const auto other = random_policy(4, 3, 1.2, rng);
  const auto vals = exact_q_v(m, p.probs());
  EXPECT_GT(max_abs(expected_advantage(vals, other.probs(), 3)), 1e-3);
}

TEST(Tabular, OccupancyIsDistribution) {
  Rng rng(9);
  const auto m = random_mdp(6, 2, 0.9, rng);
  const auto p = random_policy(6, 2, 1.0, rng);
  const auto d = occupancy(m, p.probs());
  double s = 0.0;
  for (double x : d) {
    EXPECT_GE(x, 0.0);
    s += x;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Tabular, GuidedProbsAreInterpolatedSoftmax) {
  Rng rng(10);
  const auto p = random_policy(2, 3, 0.0, rng);
  const auto probs = p.probs();
  const auto u = p.uncond_probs();
  EXPECT_LT(max_abs_diff({probs.begin(), probs.begin() + 3}, u), 1e-15);
  EXPECT_LT(max_abs_diff({probs.begin() + 3, probs.end()}, u), 1e-15);
}

TEST(Tabular, InvalidInputsThrow) {
  Rng rng(11);
  auto m = random_mdp(3, 2, 0.9, rng);
  m.transitions[0] += 0.1;
  EXPECT_THROW(m.validate(), Error);
  EXPECT_THROW(exact_q_v(single_state(1.0, 1.0), std::vector<double>{0.5, 0.5}), Error);
  EXPECT_THROW(random_mdp(9, 8, 0.9, rng), Error);
}
