#include "pgg/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pgg/error.hpp"

namespace pgg {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap(double x, double lo, double hi) {
  const double diff = hi - lo;
  while (x > hi) x -= diff;
  while (x < lo) x += diff;
  return x;
}

double angle_normalize(double x) {
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  return y - kPi;
}

std::size_t discrete_action(const ActionSpace& space, std::span<const double> action) {
  if (action.size() != 1) {
    throw Error("step: discrete action must be a single index, got " +
                std::to_string(action.size()) + " values");
  }
  const double a = action[0];
  if (!std::isfinite(a) || a < 0.0 || a != std::floor(a) ||
      a >= static_cast<double>(space.count)) {
    throw Error("step: invalid action " + std::to_string(a) + " for " +
                std::to_string(space.count) + " actions");
  }
  return static_cast<std::size_t>(a);
}

// Continuous actions are clipped to the box at the env boundary.
std::vector<double> clipped_action(const ActionSpace& space, std::span<const double> action) {
  if (action.size() != space.low.size()) {
    throw Error("step: action has " + std::to_string(action.size()) + " dims, expected " +
                std::to_string(space.low.size()));
  }
  std::vector<double> out(action.size());
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (!std::isfinite(action[i])) throw Error("step: non-finite action");
    out[i] = std::clamp(action[i], space.low[i], space.high[i]);
  }
  return out;
}

}  // namespace

// ---- Env ----

std::vector<double> Env::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  reset_state(rng_);
  steps_ = 0;
  needs_reset_ = false;
  return observation();
}

StepResult Env::step(std::span<const double> action) {
  if (needs_reset_) throw Error("step: " + name() + " episode finished, call reset()");
  auto [reward, terminated] = advance(action);
  ++steps_;
  StepResult out;
  out.observation = observation();
  out.reward = reward;
  out.terminated = terminated;
  out.truncated = !terminated && steps_ >= time_limit();
  if (out.done()) needs_reset_ = true;
  return out;
}

// ---- CartPole ----

const ActionSpace& CartPole::action_space() const {
  static const ActionSpace space{true, 2, {}, {}};
  return space;
}

std::vector<double> CartPole::observation() const { return {state.begin(), state.end()}; }

void CartPole::reset_state(Rng& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& s : state) s = u(rng);
}

std::pair<double, bool> CartPole::advance(std::span<const double> action) {
  const std::size_t a = discrete_action(action_space(), action);
  auto [x, x_dot, theta, theta_dot] = state;
  const double force = a == 1 ? kForceMag : -kForceMag;
  const double costheta = std::cos(theta);
  const double sintheta = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sintheta) / kTotalMass;
  const double thetaacc = (kGravity * sintheta - costheta * temp) /
                          (kHalfLength * (4.0 / 3.0 - kMassPole * costheta * costheta / kTotalMass));
  const double xacc = temp - kPoleMassLength * thetaacc * costheta / kTotalMass;
  x += kTau * x_dot;
  x_dot += kTau * xacc;
  theta += kTau * theta_dot;
  theta_dot += kTau * thetaacc;
  state = {x, x_dot, theta, theta_dot};
  const bool terminated =
      x < -kXThreshold || x > kXThreshold || theta < -kThetaThreshold || theta > kThetaThreshold;
  return {1.0, terminated};
}

// ---- Acrobot ----

const ActionSpace& Acrobot::action_space() const {
  static const ActionSpace space{true, 3, {}, {}};
  return space;
}

std::vector<double> Acrobot::observation() const {
  return {std::cos(state[0]), std::sin(state[0]), std::cos(state[1]),
          std::sin(state[1]), state[2], state[3]};
}

void Acrobot::reset_state(Rng& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& s : state) s = u(rng);
}

namespace {

using AcrobotState = std::array<double, 4>;

AcrobotState acrobot_derivative(const AcrobotState& s, double torque) {
  constexpr double m1 = Acrobot::kLinkMass1, m2 = Acrobot::kLinkMass2;
  constexpr double l1 = Acrobot::kLinkLength1;
  constexpr double lc1 = Acrobot::kLinkCom1, lc2 = Acrobot::kLinkCom2;
  constexpr double i1 = Acrobot::kLinkMoi, i2 = Acrobot::kLinkMoi;
  constexpr double g = 9.8;
  const auto [theta1, theta2, dtheta1, dtheta2] = s;
  const double d1 =
      m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(theta2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(theta2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(theta1 + theta2 - kPi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                      2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(theta1 - kPi / 2.0) + phi2;
  const double ddtheta2 =
      (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * std::sin(theta2) - phi2) /
      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
  return {dtheta1, dtheta2, ddtheta1, ddtheta2};
}

}  // namespace

std::pair<double, bool> Acrobot::advance(std::span<const double> action) {
  static constexpr double kTorques[] = {-1.0, 0.0, 1.0};
  const double torque = kTorques[discrete_action(action_space(), action)];
  auto axpy = [](const AcrobotState& y, double h, const AcrobotState& k) {
    AcrobotState out;
    for (std::size_t i = 0; i < 4; ++i) out[i] = y[i] + h * k[i];
    return out;
  };
  const AcrobotState& y0 = state;
  const AcrobotState k1 = acrobot_derivative(y0, torque);
  const AcrobotState k2 = acrobot_derivative(axpy(y0, kDt / 2.0, k1), torque);
  const AcrobotState k3 = acrobot_derivative(axpy(y0, kDt / 2.0, k2), torque);
  const AcrobotState k4 = acrobot_derivative(axpy(y0, kDt, k3), torque);
  AcrobotState ns;
  for (std::size_t i = 0; i < 4; ++i) {
    ns[i] = y0[i] + kDt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  ns[0] = wrap(ns[0], -kPi, kPi);
  ns[1] = wrap(ns[1], -kPi, kPi);
  ns[2] = std::clamp(ns[2], -kMaxVel1, kMaxVel1);
  ns[3] = std::clamp(ns[3], -kMaxVel2, kMaxVel2);
  state = ns;
  const bool terminated = -std::cos(state[0]) - std::cos(state[1] + state[0]) > 1.0;
  return {terminated ? 0.0 : -1.0, terminated};
}

// ---- Pendulum ----

const ActionSpace& Pendulum::action_space() const {
  static const ActionSpace space{false, 0, {-kMaxTorque}, {kMaxTorque}};
  return space;
}

std::vector<double> Pendulum::observation() const {
  return {std::cos(theta), std::sin(theta), theta_dot};
}

double Pendulum::mechanical_energy() const {
  return kMass * kLength * kLength * theta_dot * theta_dot / 6.0 +
         0.5 * kMass * kGravity * kLength * std::cos(theta);
}

void Pendulum::reset_state(Rng& rng) {
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> speed(-1.0, 1.0);
  theta = angle(rng);
  theta_dot = speed(rng);
}

std::pair<double, bool> Pendulum::advance(std::span<const double> action) {
  const double u = clipped_action(action_space(), action)[0];
  const double th = angle_normalize(theta);
  const double cost = th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u;
  double new_dot = theta_dot + (3.0 * kGravity / (2.0 * kLength) * std::sin(theta) +
                                3.0 / (kMass * kLength * kLength) * u) * kDt;
  new_dot = std::clamp(new_dot, -kMaxSpeed, kMaxSpeed);
  theta += new_dot * kDt;
  theta_dot = new_dot;
  return {-cost, false};
}

// ---- MountainCarContinuous ----

const ActionSpace& MountainCarContinuous::action_space() const {
  static const ActionSpace space{false, 0, {-1.0}, {1.0}};
  return space;
}

std::vector<double> MountainCarContinuous::observation() const { return {position, velocity}; }

void MountainCarContinuous::reset_state(Rng& rng) {
  std::uniform_real_distribution<double> u(-0.6, -0.4);
  position = u(rng);
  velocity = 0.0;
}

std::pair<double, bool> MountainCarContinuous::advance(std::span<const double> action) {
  const double force = clipped_action(action_space(), action)[0];
  velocity += force * kPower - 0.0025 * std::cos(3.0 * position);
  velocity = std::clamp(velocity, -kMaxSpeed, kMaxSpeed);
  position += velocity;
  position = std::clamp(position, kMinPosition, kMaxPosition);
  if (position == kMinPosition && velocity < 0.0) velocity = 0.0;
  const bool terminated = position >= kGoalPosition && velocity >= 0.0;
  double reward = terminated ? 100.0 : 0.0;
  reward -= force * force * 0.1;
  return {reward, terminated};
}

// ---- registry ----

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "acrobot") return std::make_unique<Acrobot>();
  if (name == "pendulum") return std::make_unique<Pendulum>();
  if (name == "mountaincar-cont") return std::make_unique<MountainCarContinuous>();
  throw Error("env: unknown environment '" + name + "'");
}

std::vector<std::string> env_names() {
  return {"cartpole", "acrobot", "pendulum", "mountaincar-cont"};
}

bool env_is_discrete(const std::string& name) { return make_env(name)->action_space().discrete; }

// ---- VecEnv ----

VecEnv::VecEnv(const std::string& name, std::size_t num_envs, std::uint64_t seed) : seed_(seed) {
  if (num_envs == 0) throw Error("vec_env: num_envs must be positive");
  for (std::size_t i = 0; i < num_envs; ++i) envs_.push_back(make_env(name));
  running_return_.assign(num_envs, 0.0);
  running_length_.assign(num_envs, 0);
}

std::vector<double> VecEnv::reset() {
  std::vector<double> obs;
  obs.reserve(size() * observation_dim());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto o = envs_[i]->reset(seed_ + i);
    obs.insert(obs.end(), o.begin(), o.end());
    running_return_[i] = 0.0;
    running_length_[i] = 0;
  }
  return obs;
}

VecStep VecEnv::step(std::span<const double> actions) {
  const std::size_t n = size();
  const std::size_t adim = action_space().dim();
  if (actions.size() != n * adim) {
    throw Error("vec_step: expected " + std::to_string(n * adim) + " action values, got " +
                std::to_string(actions.size()));
  }
  VecStep out;
  out.observations.reserve(n * observation_dim());
  out.rewards.resize(n);
  out.terminated.resize(n);
  out.truncated.resize(n);
  out.dones.resize(n);
  out.episode_returns.resize(n);
  out.episode_lengths.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    StepResult r = envs_[i]->step(actions.subspan(i * adim, adim));
    running_return_[i] += r.reward;
    running_length_[i] += 1;
    out.rewards[i] = r.reward;
    out.terminated[i] = r.terminated;
    out.truncated[i] = r.truncated;
    out.dones[i] = r.done();
    if (r.done()) {
      out.episode_returns[i] = running_return_[i];
      out.episode_lengths[i] = running_length_[i];
      running_return_[i] = 0.0;
      running_length_[i] = 0;
      r.observation = envs_[i]->reset();
    }
    out.observations.insert(out.observations.end(), r.observation.begin(), r.observation.end());
  }
  return out;
}

}  // namespace pgg
