#include <gtest/gtest.h>

#include <filesystem>

#include "pgg/checkpoint.hpp"
#include "pgg/error.hpp"
#include "pgg/trainer.hpp"

using namespace pgg;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint(PggTrainer& t) {
  return make_checkpoint(t.config(), t.model(), t.optimizer(), t.runner().obs_normalizer(),
                         t.global_step(), 100);
}

TrainConfig tiny() {
  auto c = TrainConfig::defaults_for("pendulum");
  c.num_steps = 32;
  c.num_minibatches = 4;
  c.update_epochs = 1;
  c.total_timesteps = 64;
  c.gamma_train = 1.1;
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  PggTrainer t(tiny());
  t.run_iteration();
  const auto ck = sample_checkpoint(t);
  const auto bytes = serialize_checkpoint(ck);
  const auto back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.parameters.size(), t.model().parameters().size());
  EXPECT_EQ(back.parameters.back().name, t.model().null_embedding().name());
  EXPECT_TRUE(back.has_obs_norm);
  EXPECT_EQ(back.adam_step, t.optimizer().state().step);
}

TEST(Checkpoint, RestoreReproducesModelAndOptimizer) {
  PggTrainer a(tiny());
  a.run_iteration();
  const auto ck = sample_checkpoint(a);
  auto c = tiny();
  c.seed = 9;
  PggTrainer b(c);
  restore_parameters(ck, b.model());
  restore_optimizer(ck, b.optimizer());
  const auto pa = a.model().parameters();
  const auto pb = b.model().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].values().begin(), pa[i].values().end(), pb[i].values().begin()));
  }
  EXPECT_EQ(a.optimizer().state().first_moment, b.optimizer().state().first_moment);
  EXPECT_EQ(a.optimizer().state().second_moment, b.optimizer().state().second_moment);
}

TEST(Checkpoint, FileRoundTrip) {
  PggTrainer t(tiny());
  const auto path = fs::temp_directory_path() / "pgg_test_ckpt.bin";
  save_checkpoint(path, sample_checkpoint(t));
  EXPECT_FALSE(fs::exists(path.string() + ".tmp"));
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(path)), serialize_checkpoint(sample_checkpoint(t)));
  EXPECT_EQ(checkpoint_filename(200000), "ckpt_200000.bin");
}

TEST(Checkpoint, CorruptInputIsRejected) {
  PggTrainer t(tiny());
  const auto bytes = serialize_checkpoint(sample_checkpoint(t));
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), Error);
  EXPECT_THROW(deserialize_checkpoint(""), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), Error);
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(deserialize_checkpoint(bad_version), Error);
  auto bad_config = bytes;
  bad_config[16] ^= 1;
  EXPECT_THROW(deserialize_checkpoint(bad_config), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt_1.bin"), Error);
}

TEST(Checkpoint, ShapeMismatchIsReported) {
  PggTrainer t(tiny());
  auto ck = sample_checkpoint(t);
  ck.parameters[0].shape = {1, 1};
  ck.parameters[0].values = {0.0};
  try {
    restore_parameters(ck, t.model());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos);
  }
  ck.parameters.pop_back();
  EXPECT_THROW(restore_parameters(ck, t.model()), Error);
}
