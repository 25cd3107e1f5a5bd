#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pgg {

// Hyperparameters of one training run. Defaults follow the reference PPO
// settings for the environment family (see TrainConfig::defaults_for).
struct TrainConfig {
  std::string env;
  std::int64_t total_timesteps = 500000;
  // Stop early while keeping the learning-rate schedule of total_timesteps.
  // 0 means run to total_timesteps.
  std::int64_t stop_timesteps = 0;
  double gamma_train = 1.0;
  double p_drop = 0.0;
  // Dropout draws one mask per minibatch instead of one per transition.
  bool dropout_per_minibatch = false;
  double learning_rate = 2.5e-4;
  bool anneal_lr = true;
  std::int64_t num_envs = 4;
  std::int64_t num_steps = 128;
  std::int64_t update_epochs = 4;
  std::int64_t num_minibatches = 4;
  double clip_coef = 0.2;
  bool clip_vloss = true;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double max_grad_norm = 0.5;
  double discount = 0.99;
  double gae_lambda = 0.95;
  bool norm_adv = true;
  double adam_eps = 1e-5;
  std::int64_t seed = 1;
  std::int64_t checkpoint_interval = 100000;
  bool normalize_obs = false;
  bool normalize_reward = false;

  static TrainConfig defaults_for(const std::string& env);

  std::int64_t batch_size() const { return num_envs * num_steps; }
  std::int64_t minibatch_size() const { return batch_size() / num_minibatches; }
  std::int64_t num_iterations() const { return total_timesteps / batch_size(); }
  std::int64_t stop_at() const { return stop_timesteps > 0 ? stop_timesteps : total_timesteps; }

  // Throws pgg::Error "<field>: <problem>" on the first invalid field.
  void validate() const;

  // Canonical "name: type = value" text, one field per line, schema order.
  std::string to_text() const;
  std::uint64_t hash() const;
};

// Parses the typed key-value format:
//
//   # comment
//   env: string = cartpole
//   total_timesteps: int = 200000
//   gamma_train: float = 1.1
//   anneal_lr: bool = true
//
// Fields absent from the file take the env-family defaults. Unknown keys,
// type mismatches, and duplicates are errors naming the field.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

// Overrides one field from a string value (used for CLI flags and
// environment variables); throws on unknown names or unparsable values.
void set_config_field(TrainConfig& config, const std::string& name, const std::string& value);

// Applies every PGG_<FIELD> variable (upper-cased field name) present in
// `env_vars`.
void apply_env_overrides(TrainConfig& config, const std::map<std::string, std::string>& env_vars);
std::map<std::string, std::string> process_env_overrides();

std::vector<std::string> config_field_names();

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pgg
