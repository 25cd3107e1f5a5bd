#include <gtest/gtest.h>

#include <cmath>

#include "pgg/actor_critic.hpp"
#include "pgg/error.hpp"
#include "pgg/guided.hpp"
#include "test_util.hpp"

using namespace pgg;

namespace {

ActorCriticSpec discrete_spec(std::size_t obs = 4, std::size_t actions = 2) {
  ActorCriticSpec s;
  s.observation_dim = obs;
  s.discrete = true;
  s.action_count = actions;
  return s;
}

ActorCriticSpec continuous_spec(std::size_t obs = 3, std::size_t dim = 1) {
  ActorCriticSpec s;
  s.observation_dim = obs;
  s.discrete = false;
  s.action_dim = dim;
  return s;
}

void zero_all(const ActorCritic& m) {
  for (auto p : m.parameters())
    for (auto& v : p.mutable_values()) v = 0.0;
}

std::size_t mlp_count(std::size_t in, std::size_t h, std::size_t out) {
  return in * h + h + h * h + h + h * out + out;
}

}  // namespace

TEST(ActorCritic, ZeroNetworkGivesZeroOutputs) {
  Rng rng(1);
  ActorCritic m(discrete_spec(), rng);
  zero_all(m);
  const std::vector<double> obs{0.3, -1.0, 2.0, 0.1};
  for (double v : m.actor_forward(obs)) EXPECT_EQ(v, 0.0);
  for (double v : m.actor_forward_null_values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(m.critic_forward(obs), 0.0);
}

TEST(ActorCritic, NullEmbeddingStartsAtZeroAndMatchesZeroObservation) {
  Rng rng(2);
  ActorCritic m(discrete_spec(), rng);
  for (double v : m.null_embedding().values()) EXPECT_EQ(v, 0.0);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(m.actor_forward(zeros), m.actor_forward_null_values());
  m.null_embedding().node()->value[0] = 0.5;
  EXPECT_NE(m.actor_forward(zeros), m.actor_forward_null_values());
}

TEST(ActorCritic, ParameterCountAddsOnlyTheNullEmbedding) {
  Rng r1(3), r2(3);
  auto with = discrete_spec(6, 3);
  auto without = with;
  without.with_null_embedding = false;
  const ActorCritic a(with, r1), b(without, r2);
  const std::size_t vanilla = mlp_count(6, 64, 1) + mlp_count(6, 64, 3);
  EXPECT_EQ(b.parameter_count(), vanilla);
  EXPECT_EQ(a.parameter_count(), vanilla + 6);

  Rng r3(3), r4(3);
  auto cw = continuous_spec(3, 1);
  auto cwo = cw;
  cwo.with_null_embedding = false;
  const ActorCritic c(cw, r3), d(cwo, r4);
  EXPECT_EQ(d.parameter_count(), mlp_count(3, 64, 1) + mlp_count(3, 64, 1) + 1);
  EXPECT_EQ(c.parameter_count(), d.parameter_count() + 3);
}

TEST(ActorCritic, NullEmbeddingIsLastParameter) {
  Rng rng(4);
  ActorCritic m(continuous_spec(), rng);
  const auto ps = m.parameters();
  EXPECT_EQ(ps.back().name(), "actor.null_embedding");
  EXPECT_EQ(ps[ps.size() - 2].name(), "actor.log_std");
}

TEST(ActorCritic, SharedInitWithAndWithoutNullEmbedding) {
  Rng r1(5), r2(5);
  auto without = discrete_spec();
  without.with_null_embedding = false;
  const ActorCritic a(discrete_spec(), r1), b(without, r2);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pb.size(); ++i) {
    EXPECT_EQ(std::vector<double>(pa[i].values().begin(), pa[i].values().end()),
              std::vector<double>(pb[i].values().begin(), pb[i].values().end()));
  }
}

TEST(ActorCritic, DimensionMismatchRejected) {
  Rng rng(6);
  ActorCritic m(discrete_spec(), rng);
  const std::vector<double> bad(3, 0.0);
  EXPECT_THROW(m.actor_forward(bad), Error);
  EXPECT_THROW(m.critic_forward(bad), Error);
}

TEST(ActorCritic, HeadGainsFollowReferenceInit) {
  Rng rng(7);
  ActorCritic m(discrete_spec(4, 2), rng);
  // Policy head rows are orthonormal scaled by 0.01: squared norms of its 2 columns are 1e-4.
  const Tensor& w = m.actor().layers().back().weight;
  for (std::size_t c = 0; c < 2; ++c) {
    double n = 0;
    for (std::size_t r = 0; r < 64; ++r) n += w.at(r, c) * w.at(r, c);
    EXPECT_NEAR(n, 1e-4, 1e-12);
  }
  const Tensor& v = m.critic().layers().back().weight;
  double n = 0;
  for (std::size_t r = 0; r < 64; ++r) n += v.at(r, 0) * v.at(r, 0);
  EXPECT_NEAR(n, 1.0, 1e-12);
  for (const auto& l : m.actor().layers())
    for (double b : l.bias.values()) EXPECT_EQ(b, 0.0);
}

TEST(ActorCritic, FiniteDifferenceChecks) {
  Rng rng(8);
  ActorCritic m(discrete_spec(), rng);
  std::mt19937_64 g(1);
  const Tensor obs = Tensor::from({1, 4}, test::uniform_values(4, -1, 1, g));
  const Tensor& w0 = m.actor().layers().front().weight;
  auto logit0 = [&] { return sum(gather(m.actor_forward(obs), std::vector<std::size_t>{0})); };
  EXPECT_LT(test::rel_error(test::analytic_grad({w0}, logit0()), test::numeric_grad({w0}, [&] { return logit0().item(); })),
            1e-4);
  auto value = [&] { return sum(m.critic_forward(obs)); };
  const auto cp = m.critic().parameters();
  EXPECT_LT(test::rel_error(test::analytic_grad(cp, value()), test::numeric_grad(cp, [&] { return value().item(); })),
            1e-4);
}

TEST(ActorCritic, CriticIsFiniteOnBoundedObservations) {
  Rng rng(9);
  ActorCritic m(discrete_spec(), rng);
  const std::vector<double> obs{2.4, -5.0, 0.2, 5.0};
  EXPECT_TRUE(std::isfinite(m.critic_forward(obs)));
}

TEST(ActorCritic, NullGradientZeroAtGammaOne) {
  Rng rng(10);
  ActorCritic m(discrete_spec(), rng);
  m.null_embedding().node()->value = {0.3, -0.2, 0.1, 0.5};
  const Tensor obs = Tensor::from({3, 4}, std::vector<double>(12, 0.25));
  const std::vector<std::size_t> act{0, 1, 1};
  backward(sum(categorical_log_prob(guided_logits(m.actor_forward(obs), m.actor_forward_null(), 1.0), act)));
  for (double g : m.null_embedding().grad()) EXPECT_EQ(g, 0.0);
}

TEST(ActorCritic, NullOnlyStepLeavesConditionalOutputs) {
  Rng rng(11);
  ActorCritic m(discrete_spec(), rng);
  const std::vector<double> obs{0.1, 0.2, 0.3, 0.4};
  m.null_embedding().node()->value = {0.3, -0.2, 0.1, 0.5};
  const auto before = m.actor_forward(obs);
  Adam opt({m.null_embedding()}, AdamOptions{0.1});
  backward(sum(square(m.actor_forward_null())));
  opt.step(1.0);
  EXPECT_NE(m.null_embedding().values()[0], 0.3);
  EXPECT_EQ(m.actor_forward(obs), before);
}

TEST(RunningMeanStd, MatchesBatchStatistics) {
  RunningMeanStd s(1);
  const std::vector<double> a{1, 2, 3, 4}, b{10, 20};
  s.update(a, 4);
  s.update(b, 2);
  const std::vector<double> all{1, 2, 3, 4, 10, 20};
  double mean = 0;
  for (double v : all) mean += v / 6;
  double var = 0;
  for (double v : all) var += (v - mean) * (v - mean) / 6;
  EXPECT_NEAR(s.mean()[0], mean, 1e-3);
  EXPECT_NEAR(s.var()[0], var, 1e-2);
  EXPECT_NEAR(s.count(), 6.0001, 1e-12);
}

TEST(ObservationNormalizer, ClipsToTen) {
  ObservationNormalizer n(1);
  std::vector<double> batch{0.0, 0.0, 0.0};
  n.update_and_normalize(batch, 3);
  std::vector<double> far{1e6};
  n.normalize(far);
  EXPECT_EQ(far[0], 10.0);
}
