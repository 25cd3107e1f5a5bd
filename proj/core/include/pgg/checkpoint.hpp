#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgg/actor_critic.hpp"
#include "pgg/config.hpp"
#include "pgg/optim.hpp"

namespace pgg {

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Versioned binary snapshot. Layout (little-endian):
//   "PGGCKPT\0" u32 version
//   str config_text, u64 config_hash, i64 global_step, i64 milestone
//   u32 n, n x array                       model parameters (incl. null embedding)
//   u64 adam_step, u32 n, n x array, u32 n, n x array   Adam moments
//   u8 has_obs_norm [array mean, array var, f64 count]
// where str = u32 length + bytes and array = str name, u32 rank, rank x u64
// extents, u64 count, count x f64.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_text;
  std::uint64_t config_hash = 0;
  std::int64_t global_step = 0;
  std::int64_t milestone = 0;
  std::vector<NamedArray> parameters;
  std::uint64_t adam_step = 0;
  std::vector<NamedArray> adam_first_moment;
  std::vector<NamedArray> adam_second_moment;
  bool has_obs_norm = false;
  NamedArray obs_mean;
  NamedArray obs_var;
  double obs_count = 0.0;
};

Checkpoint make_checkpoint(const TrainConfig& config, const ActorCritic& model,
                           const Adam& optimizer, const ObservationNormalizer* obs_norm,
                           std::int64_t global_step, std::int64_t milestone);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameter arrays into the model by name; every model parameter must
// be present with a matching shape.
void restore_parameters(const Checkpoint& ckpt, ActorCritic& model);
void restore_optimizer(const Checkpoint& ckpt, Adam& optimizer);

// A policy rebuilt from a checkpoint for evaluation.
struct LoadedPolicy {
  TrainConfig config;
  ActorCritic model;
  std::optional<ObservationNormalizer> obs_norm;
  std::int64_t global_step = 0;
  std::int64_t milestone = 0;
};

LoadedPolicy load_policy(const std::filesystem::path& path);

std::filesystem::path checkpoint_filename(std::int64_t milestone);

}  // namespace pgg
