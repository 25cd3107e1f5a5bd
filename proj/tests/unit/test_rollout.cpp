#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pgg/error.hpp"
#include "pgg/rollout.hpp"

using namespace pgg;

namespace {

// A_t = sum_l (discount lambda)^l delta_{t+l}, truncated at the first done.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<std::uint8_t>& d, double bootstrap, double g,
                               double lam) {
  const std::size_t T = r.size();
  auto value = [&](std::size_t t) { return t < T ? v[t] : bootstrap; };
  std::vector<double> a(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      const double delta = r[k] + g * value(k + 1) * (1.0 - d[k]) - v[k];
      a[t] += w * delta;
      if (d[k]) break;
      w *= g * lam;
    }
  }
  return a;
}

}  // namespace

TEST(Gae, LambdaZeroIsTdResidual) {
  const std::vector<double> r{1, 0, 2}, v{0.5, 0.2, -0.1}, boot{0.3};
  const std::vector<std::uint8_t> d{0, 1, 0};
  const auto e = compute_gae(r, v, d, boot, 1, 0.9, 0.0);
  EXPECT_DOUBLE_EQ(e.advantages[0], 1 + 0.9 * 0.2 - 0.5);
  EXPECT_DOUBLE_EQ(e.advantages[1], 0 - 0.2);
  EXPECT_DOUBLE_EQ(e.advantages[2], 2 + 0.9 * 0.3 + 0.1);
}

TEST(Gae, ZeroRewardsAndValues) {
  const std::vector<double> r(6, 0.0), v(6, 0.0), boot(2, 0.0);
  const std::vector<std::uint8_t> d(6, 0);
  for (double a : compute_gae(r, v, d, boot, 2, 0.99, 0.95).advantages) EXPECT_EQ(a, 0.0);
}

TEST(Gae, ThreeStepToyMatchesDoubleLoop) {
  const std::vector<double> r{1, 1, 1}, v{0.5, 0.5, 0.5}, boot{0.5};
  const std::vector<std::uint8_t> d{0, 0, 0};
  const auto e = compute_gae(r, v, d, boot, 1, 0.99, 0.95);
  const auto o = gae_oracle(r, v, d, 0.5, 0.99, 0.95);
  for (int t = 0; t < 3; ++t) {
    EXPECT_NEAR(e.advantages[t], o[t], 1e-12);
    EXPECT_NEAR(e.returns[t], o[t] + 0.5, 1e-12);
  }
}

TEST(Gae, RandomInstancesMatchDirectSummation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::bernoulli_distribution done(0.1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 1 + trial % 64;
    const std::size_t N = 3;
    std::vector<double> r(T * N), v(T * N), boot(N);
    std::vector<std::uint8_t> d(T * N);
    for (auto& x : r) x = n(rng);
    for (auto& x : v) x = n(rng);
    for (auto& x : boot) x = n(rng);
    for (auto& x : d) x = done(rng);
    const auto e = compute_gae(r, v, d, boot, N, 0.97, 0.9);
    for (std::size_t env = 0; env < N; ++env) {
      std::vector<double> re, ve;
      std::vector<std::uint8_t> de;
      for (std::size_t t = 0; t < T; ++t) {
        re.push_back(r[t * N + env]);
        ve.push_back(v[t * N + env]);
        de.push_back(d[t * N + env]);
      }
      const auto o = gae_oracle(re, ve, de, boot[env], 0.97, 0.9);
      for (std::size_t t = 0; t < T; ++t) EXPECT_NEAR(e.advantages[t * N + env], o[t], 1e-10);
    }
  }
}

TEST(Gae, DoneCutsDependenceOnSuffix) {
  std::vector<double> r{1, 2, 3, 4}, v{0.1, 0.2, 0.3, 0.4}, boot{1.0};
  const std::vector<std::uint8_t> d{0, 1, 0, 0};
  const auto before = compute_gae(r, v, d, boot, 1, 0.99, 0.95);
  r[2] = 100;
  r[3] = -50;
  v[2] = 7;
  boot[0] = -3;
  const auto after = compute_gae(r, v, d, boot, 1, 0.99, 0.95);
  EXPECT_EQ(before.advantages[0], after.advantages[0]);
  EXPECT_EQ(before.advantages[1], after.advantages[1]);
}

TEST(RolloutBuffer, RequiresFullBufferAndBootstrap) {
  RolloutBuffer b(2, 1, 1, 1);
  const std::vector<double> x{0.0};
  const std::vector<std::uint8_t> d{0};
  b.add(x, x, x, d, x, x);
  EXPECT_THROW(compute_gae(b, 0.99, 0.95), Error);
  b.add(x, x, x, d, x, x);
  EXPECT_TRUE(b.full());
  EXPECT_THROW(compute_gae(b, 0.99, 0.95), Error);
  EXPECT_THROW(b.add(x, x, x, d, x, x), Error);
  b.set_bootstrap(x);
  EXPECT_NO_THROW(compute_gae(b, 0.99, 0.95));
  b.clear();
  EXPECT_TRUE(b.empty());
  EXPECT_FALSE(b.has_bootstrap());
}

TEST(RolloutBuffer, RejectsBadParameters) {
  RolloutBuffer b(1, 1, 1, 1);
  const std::vector<double> x{0.0};
  const std::vector<std::uint8_t> d{0};
  b.add(x, x, x, d, x, x);
  b.set_bootstrap(x);
  EXPECT_THROW(compute_gae(b, 1.5, 0.95), Error);
  EXPECT_THROW(compute_gae(b, 0.99, -0.1), Error);
}

TEST(Standardize, AlreadyStandard) {
  const std::vector<double> x{1, -1};
  EXPECT_EQ(standardize(x), x);
}

TEST(Standardize, ConstantMapsToZeros) {
  const std::vector<double> x{3, 3, 3};
  for (double v : standardize(x)) EXPECT_EQ(v, 0.0);
}

TEST(Standardize, ZeroMeanUnitStd) {
  const std::vector<double> x{0, 1, 2, 3};
  const auto y = standardize(x);
  double m = 0, s = 0;
  for (double v : y) m += v / 4;
  for (double v : y) s += (v - m) * (v - m) / 4;
  EXPECT_LT(std::abs(m), 1e-10);
  EXPECT_NEAR(std::sqrt(s), 1.0, 1e-10);
}

TEST(Standardize, RandomBatchInvariant) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(3, 10);
  std::vector<double> x(128);
  for (auto& v : x) v = n(rng);
  const auto y = standardize(x);
  double m = 0, s = 0;
  for (double v : y) m += v / 128;
  for (double v : y) s += (v - m) * (v - m) / 128;
  EXPECT_LT(std::abs(m), 1e-10);
  EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6);
}
