#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgg/optim.hpp"

namespace pgg {

struct ActionSpace {
  bool discrete = true;
  std::size_t count = 0;  // discrete
  std::vector<double> low, high;  // continuous bounds

  std::size_t dim() const { return discrete ? 1 : low.size(); }
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

// Single environment instance. Actions are passed as a span of doubles: one
// entry holding the index for discrete spaces, the action vector otherwise.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual const ActionSpace& action_space() const = 0;
  virtual int time_limit() const = 0;

  // Reseeds the internal rng when a seed is given, otherwise continues the
  // current stream.
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt);
  // Throws on invalid actions and when stepping a finished episode.
  StepResult step(std::span<const double> action);

  int steps_elapsed() const { return steps_; }
  bool needs_reset() const { return needs_reset_; }
  virtual std::vector<double> observation() const = 0;

 protected:
  virtual void reset_state(Rng& rng) = 0;
  // Advances physics; returns (reward, terminated).
  virtual std::pair<double, bool> advance(std::span<const double> action) = 0;

 private:
  Rng rng_{0};
  int steps_ = 0;
  bool needs_reset_ = true;
};

class CartPole final : public Env {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double kXThreshold = 2.4;

  std::string name() const override { return "cartpole"; }
  std::size_t observation_dim() const override { return 4; }
  const ActionSpace& action_space() const override;
  int time_limit() const override { return 500; }
  std::vector<double> observation() const override;

  // x, x_dot, theta, theta_dot
  std::array<double, 4> state{};

 protected:
  void reset_state(Rng& rng) override;
  std::pair<double, bool> advance(std::span<const double> action) override;
};

class Acrobot final : public Env {
 public:
  static constexpr double kDt = 0.2;
  static constexpr double kLinkLength1 = 1.0;
  static constexpr double kLinkMass1 = 1.0;
  static constexpr double kLinkMass2 = 1.0;
  static constexpr double kLinkCom1 = 0.5;
  static constexpr double kLinkCom2 = 0.5;
  static constexpr double kLinkMoi = 1.0;
  static constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
  static constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;

  std::string name() const override { return "acrobot"; }
  std::size_t observation_dim() const override { return 6; }
  const ActionSpace& action_space() const override;
  int time_limit() const override { return 500; }
  // cos t1, sin t1, cos t2, sin t2, t1_dot, t2_dot
  std::vector<double> observation() const override;

  // theta1, theta2, theta1_dot, theta2_dot
  std::array<double, 4> state{};

 protected:
  void reset_state(Rng& rng) override;
  std::pair<double, bool> advance(std::span<const double> action) override;
};

class Pendulum final : public Env {
 public:
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  std::string name() const override { return "pendulum"; }
  std::size_t observation_dim() const override { return 3; }
  const ActionSpace& action_space() const override;
  int time_limit() const override { return 200; }
  // cos th, sin th, th_dot; th = 0 is upright
  std::vector<double> observation() const override;
  // Rigid-rod energy consistent with the dynamics.
  double mechanical_energy() const;

  double theta = 0.0;
  double theta_dot = 0.0;

 protected:
  void reset_state(Rng& rng) override;
  std::pair<double, bool> advance(std::span<const double> action) override;
};

class MountainCarContinuous final : public Env {
 public:
  static constexpr double kMinPosition = -1.2;
  static constexpr double kMaxPosition = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPosition = 0.45;
  static constexpr double kPower = 0.0015;

  std::string name() const override { return "mountaincar-cont"; }
  std::size_t observation_dim() const override { return 2; }
  const ActionSpace& action_space() const override;
  int time_limit() const override { return 999; }
  std::vector<double> observation() const override;

  double position = 0.0;
  double velocity = 0.0;

 protected:
  void reset_state(Rng& rng) override;
  std::pair<double, bool> advance(std::span<const double> action) override;
};

// Registry: "cartpole", "acrobot", "pendulum", "mountaincar-cont".
std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();
bool env_is_discrete(const std::string& name);

struct VecStep {
  std::vector<double> observations;  // [N, obs_dim]; reset obs where done
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  std::vector<std::uint8_t> dones;
  // Returns and lengths of episodes that finished on this step, per env.
  std::vector<std::optional<double>> episode_returns;
  std::vector<std::optional<int>> episode_lengths;
};

// N independent copies stepped in lockstep with automatic reset. Env i is
// seeded with seed + i at the first reset.
class VecEnv {
 public:
  VecEnv(const std::string& name, std::size_t num_envs, std::uint64_t seed);

  std::size_t size() const { return envs_.size(); }
  std::size_t observation_dim() const { return envs_.front()->observation_dim(); }
  const ActionSpace& action_space() const { return envs_.front()->action_space(); }
  Env& env(std::size_t i) { return *envs_[i]; }

  // [N, obs_dim]
  std::vector<double> reset();
  // actions: [N, action_dim] (one entry per env for discrete spaces)
  VecStep step(std::span<const double> actions);

 private:
  std::vector<std::unique_ptr<Env>> envs_;
  std::vector<double> running_return_;
  std::vector<int> running_length_;
  std::uint64_t seed_;
};

}  // namespace pgg
