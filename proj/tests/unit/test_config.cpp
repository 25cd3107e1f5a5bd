#include <gtest/gtest.h>

#include <cstdlib>

#include "pgg/config.hpp"
#include "pgg/error.hpp"

using namespace pgg;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, FamilyDefaults) {
  const auto d = TrainConfig::defaults_for("cartpole");
  EXPECT_EQ(d.total_timesteps, 500000);
  EXPECT_EQ(d.learning_rate, 2.5e-4);
  EXPECT_EQ(d.num_envs, 4);
  EXPECT_EQ(d.num_steps, 128);
  EXPECT_EQ(d.update_epochs, 4);
  EXPECT_EQ(d.num_minibatches, 4);
  EXPECT_EQ(d.ent_coef, 0.01);
  EXPECT_EQ(d.checkpoint_interval, 100000);
  const auto c = TrainConfig::defaults_for("pendulum");
  EXPECT_EQ(c.total_timesteps, 1000000);
  EXPECT_EQ(c.learning_rate, 3e-4);
  EXPECT_EQ(c.num_envs, 1);
  EXPECT_EQ(c.num_steps, 2048);
  EXPECT_EQ(c.update_epochs, 10);
  EXPECT_EQ(c.num_minibatches, 32);
  EXPECT_EQ(c.ent_coef, 0.0);
  EXPECT_EQ(c.checkpoint_interval, 200000);
  EXPECT_TRUE(c.normalize_obs);
  EXPECT_EQ(c.gamma_train, 1.0);
  EXPECT_EQ(c.p_drop, 0.0);
}

TEST(Config, ParsesTypedLines) {
  const auto c = parse_config(
      "# comment\n"
      "env: string = acrobot\n"
      "gamma_train: float = 1.1   # trailing comment\n"
      "total_timesteps: int = 2e5\n"
      "anneal_lr: bool = false\n");
  EXPECT_EQ(c.env, "acrobot");
  EXPECT_EQ(c.gamma_train, 1.1);
  EXPECT_EQ(c.total_timesteps, 200000);
  EXPECT_FALSE(c.anneal_lr);
  EXPECT_EQ(c.num_envs, 4);
}

TEST(Config, MissingEnvIsRequired) {
  EXPECT_EQ(error_of([] { parse_config("gamma_train: float = 1.0\n"); }), "env: required");
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(error_of([] { parse_config("env: string = cartpole\nlearning_rat: float = 1\n"); })
                .rfind("learning_rat:", 0),
            0u);
  EXPECT_EQ(error_of([] { parse_config("env: string = cartpole\nnum_envs: float = 2\n"); }).rfind("num_envs:", 0),
            0u);
  EXPECT_EQ(error_of([] { parse_config("env: string = cartpole\nnum_envs: int = two\n"); }).rfind("num_envs:", 0),
            0u);
  EXPECT_EQ(error_of([] { parse_config("env: string = cartpole\np_drop: float = 1.5\n"); }).rfind("p_drop:", 0),
            0u);
  EXPECT_EQ(error_of([] { parse_config("env: string = cartpole\nseed: int = 1\nseed: int = 2\n"); })
                .rfind("seed:", 0),
            0u);
  EXPECT_EQ(error_of([] { parse_config("env: string = hopper\n"); }).rfind("env:", 0), 0u);
}

TEST(Config, TextRoundTripAndHash) {
  auto c = TrainConfig::defaults_for("pendulum");
  c.gamma_train = 1.15;
  c.seed = 4;
  const auto back = parse_config(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.hash(), c.hash());
  c.seed = 5;
  EXPECT_NE(back.hash(), c.hash());
}

TEST(Config, EnvironmentOverrides) {
  auto c = TrainConfig::defaults_for("cartpole");
  apply_env_overrides(c, {{"PGG_GAMMA_TRAIN", "1.1"}, {"PGG_SEED", "9"}, {"HOME", "/x"}});
  EXPECT_EQ(c.gamma_train, 1.1);
  EXPECT_EQ(c.seed, 9);
  EXPECT_THROW(apply_env_overrides(c, {{"PGG_NOPE", "1"}}), Error);
  setenv("PGG_P_DROP", "0.1", 1);
  const auto vars = process_env_overrides();
  unsetenv("PGG_P_DROP");
  ASSERT_TRUE(vars.contains("PGG_P_DROP"));
  apply_env_overrides(c, vars);
  EXPECT_EQ(c.p_drop, 0.1);
}

TEST(Config, DerivedSizes) {
  auto c = TrainConfig::defaults_for("cartpole");
  EXPECT_EQ(c.batch_size(), 512);
  EXPECT_EQ(c.minibatch_size(), 128);
  EXPECT_EQ(c.num_iterations(), 976);
  EXPECT_EQ(c.stop_at(), 500000);
  c.stop_timesteps = 200000;
  EXPECT_EQ(c.stop_at(), 200000);
  c.num_minibatches = 3;
  EXPECT_THROW(c.validate(), Error);
}
