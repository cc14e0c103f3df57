#pragma once

#include "oril/common.hpp"
#include "oril/rng.hpp"
#include "oril/trajdata.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oril::worldsim {

using trajdata::Dataset;
using trajdata::Episode;
using trajdata::MissingGroundTruth;

struct ActionRangeError : std::runtime_error {
  explicit ActionRangeError(const std::string& what) : std::runtime_error(what) {}
};

enum class RewardKind : std::uint8_t { Sparse01, DenseUnit };

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int act_dim = 0;
  int horizon = 0;
  RewardKind reward_kind = RewardKind::Sparse01;
};

struct StepResult {
  Vector next_state;
  double reward;
  bool done;
};

// Two desk-scale environments, one per reward regime.
//
// point_reach: 2D point mass. State (px, py, vx, vy), action = acceleration
// in [-1,1]^2, dt 0.1, velocity clamped to [-1,1], position to [-1.2,1.2].
// Sparse reward: 1 when the next position is within 0.1 of the origin.
// Episodes start at rest on a ring of radius 0.4..0.95.
//
// pendulum_swing: torque-limited pendulum, angle measured from upright.
// State (cos th, sin th, thdot/8), action = torque in [-1,1] scaled by 2,
// gravity 3, dt 0.05, thdot clamped to [-8,8], semi-implicit Euler. Dense
// reward (1+cos th)/2. Max torque < gravity, so reaching the top requires
// swinging. Episodes start at a uniform angle with small angular velocity.
//
// step is a pure function of (state, action, step index); rollout loops own
// the step counter, so parallel rollouts need no shared mutable state.
class Env {
 public:
  static Env point_reach() {
    Env e;
    e.spec_ = {"point_reach", 4, 2, 100, RewardKind::Sparse01};
    return e;
  }

  static Env pendulum_swing() {
    Env e;
    e.spec_ = {"pendulum_swing", 3, 1, 200, RewardKind::DenseUnit};
    return e;
  }

  static Env by_name(const std::string& name) {
    if (name == "point_reach") return point_reach();
    if (name == "pendulum_swing") return pendulum_swing();
    throw std::invalid_argument("unknown environment: " + name);
  }

  const EnvSpec& spec() const { return spec_; }

  Vector reset(std::uint64_t seed) const {
    RngStream rng(seed, 7);
    Vector s(spec_.obs_dim);
    if (spec_.name == "point_reach") {
      const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radius = rng.uniform(0.4, 0.95);
      s << radius * std::cos(angle), radius * std::sin(angle), 0.0, 0.0;
    } else {
      const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double thdot = rng.uniform(-1.0, 1.0);
      s << std::cos(theta), std::sin(theta), thdot / kThdotScale;
    }
    return s;
  }

  StepResult step(const Vector& state, const Vector& action, int t) const {
    if (state.size() != spec_.obs_dim) throw std::invalid_argument("state dimension mismatch");
    if (action.size() != spec_.act_dim) throw std::invalid_argument("action dimension mismatch");
    if (t < 0 || t >= spec_.horizon) throw std::invalid_argument("step index outside episode");
    for (long i = 0; i < action.size(); ++i)
      if (!(action[i] >= -1.0 && action[i] <= 1.0))
        throw ActionRangeError("action component " + std::to_string(i) + " outside [-1,1]: " +
                               std::to_string(action[i]));

    StepResult out;
    if (spec_.name == "point_reach") {
      Vector next(4);
      next[2] = std::clamp(state[2] + action[0] * kDtPoint, -1.0, 1.0);
      next[3] = std::clamp(state[3] + action[1] * kDtPoint, -1.0, 1.0);
      next[0] = std::clamp(state[0] + next[2] * kDtPoint, -1.2, 1.2);
      next[1] = std::clamp(state[1] + next[3] * kDtPoint, -1.2, 1.2);
      out.reward = std::hypot(next[0], next[1]) <= kGoalRadius ? 1.0 : 0.0;
      out.next_state = std::move(next);
    } else {
      double theta = std::atan2(state[1], state[0]);
      double thdot = state[2] * kThdotScale;
      thdot += (kGravity * std::sin(theta) + action[0] * kTorqueScale) * kDtPend;
      thdot = std::clamp(thdot, -kThdotScale, kThdotScale);
      theta += thdot * kDtPend;
      Vector next(3);
      next << std::cos(theta), std::sin(theta), thdot / kThdotScale;
      out.reward = (1.0 + next[0]) / 2.0;
      out.next_state = std::move(next);
    }
    out.done = t + 1 >= spec_.horizon;
    return out;
  }

  // Deterministic controller used as the demonstration source. PointReach:
  // proportional-derivative drive to the origin. PendulumSwing: energy pumping
  // toward the separatrix with a gravity-compensated PD catch near the top.
  Vector expert_action(const Vector& state) const {
    Vector a(spec_.act_dim);
    if (spec_.name == "point_reach") {
      a[0] = std::clamp(-kPointKp * state[0] - kPointKd * state[2], -1.0, 1.0);
      a[1] = std::clamp(-kPointKp * state[1] - kPointKd * state[3], -1.0, 1.0);
      return a;
    }
    const double theta = std::atan2(state[1], state[0]);
    const double thdot = state[2] * kThdotScale;
    if (std::abs(theta) < kCatchAngle && std::abs(thdot) < kCatchSpeed) {
      const double u = -kPendKp * theta - kPendKd * thdot - kGravity * std::sin(theta) / kTorqueScale;
      a[0] = std::clamp(u, -1.0, 1.0);
      return a;
    }
    const double energy = 0.5 * thdot * thdot + kGravity * std::cos(theta);
    const double target = kGravity;  // upright at rest
    double u = (energy < target ? 1.0 : -1.0) * (thdot >= 0.0 ? 1.0 : -1.0);
    if (thdot == 0.0) u = theta >= 0.0 ? 1.0 : -1.0;
    a[0] = u;
    return a;
  }

  static constexpr double kGoalRadius = 0.1;
  static constexpr double kThdotScale = 8.0;
  static constexpr double kGravity = 3.0;
  static constexpr double kTorqueScale = 2.0;

 private:
  static constexpr double kDtPoint = 0.1;
  static constexpr double kDtPend = 0.05;
  static constexpr double kPointKp = 4.0;
  static constexpr double kPointKd = 2.8;
  static constexpr double kCatchAngle = 0.6;
  static constexpr double kCatchSpeed = 3.0;
  static constexpr double kPendKp = 8.0;
  static constexpr double kPendKd = 2.0;

  EnvSpec spec_;
};

// Data-collection policies of controllable quality.
struct BehaviorPolicy {
  enum class Kind : std::uint8_t { ScriptedExpert, NoisyExpert, Random };
  Kind kind = Kind::Random;
  double sigma = 0.0;

  static BehaviorPolicy scripted_expert() { return {Kind::ScriptedExpert, 0.0}; }
  static BehaviorPolicy noisy_expert(double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("noise scale must be >= 0");
    return {Kind::NoisyExpert, sigma};
  }
  static BehaviorPolicy random() { return {Kind::Random, 0.0}; }

  std::string label() const {
    switch (kind) {
      case Kind::ScriptedExpert: return "scripted_expert";
      case Kind::NoisyExpert: return "noisy_expert(" + std::to_string(sigma) + ")";
      default: return "random";
    }
  }
};

inline Vector act(const Env& env, const BehaviorPolicy& policy, const Vector& state, RngStream& rng) {
  const int act_dim = env.spec().act_dim;
  switch (policy.kind) {
    case BehaviorPolicy::Kind::ScriptedExpert:
      return env.expert_action(state);
    case BehaviorPolicy::Kind::NoisyExpert: {
      Vector a = env.expert_action(state);
      for (int i = 0; i < act_dim; ++i) a[i] = std::clamp(a[i] + rng.normal(0.0, policy.sigma), -1.0, 1.0);
      return a;
    }
    default: {
      Vector a(act_dim);
      for (int i = 0; i < act_dim; ++i) a[i] = rng.uniform(-1.0, 1.0);
      return a;
    }
  }
}

namespace detail {

inline void round_row_f32(Vector& v) {
  for (long i = 0; i < v.size(); ++i) v[i] = round_f32(v[i]);
}

}  // namespace detail

// Single rollout. Every stored value is quantized to binary32 at the step
// boundary and the quantized state is what the policy and dynamics see next,
// so a logged trajectory replays exactly from its own file.
inline Episode rollout_episode(const Env& env, const BehaviorPolicy& policy, std::uint64_t episode_seed,
                               std::uint64_t id) {
  const EnvSpec& spec = env.spec();
  Episode e;
  e.id = id;
  e.states.resize(spec.horizon + 1, spec.obs_dim);
  e.actions.resize(spec.horizon, spec.act_dim);
  e.gt_rewards.resize(spec.horizon);
  RngStream rng(episode_seed, 11);
  Vector state = env.reset(episode_seed);
  detail::round_row_f32(state);
  e.states.row(0) = state;
  for (int t = 0; t < spec.horizon; ++t) {
    Vector action = act(env, policy, state, rng);
    detail::round_row_f32(action);
    StepResult r = env.step(state, action, t);
    detail::round_row_f32(r.next_state);
    e.actions.row(t) = action;
    e.states.row(t + 1) = r.next_state;
    e.gt_rewards[t] = round_f32(r.reward);
    state = std::move(r.next_state);
  }
  return e;
}

// Rolls out the mix in order; episode ids are assigned sequentially from 0 and
// per-episode seeds are drawn from one master stream, so any prefix of the mix
// reproduces the same episodes.
inline Dataset generate_dataset(const Env& env, const std::vector<std::pair<BehaviorPolicy, int>>& mix,
                                std::uint64_t seed) {
  long total = 0;
  for (const auto& [policy, count] : mix) {
    if (count < 0) throw std::invalid_argument("episode counts must be >= 0");
    total += count;
  }
  if (total == 0) throw std::invalid_argument("mix must request at least one episode");
  Dataset d;
  d.obs_dim = env.spec().obs_dim;
  d.act_dim = env.spec().act_dim;
  d.episodes.reserve(total);
  RngStream master(seed, 13);
  std::uint64_t id = 0;
  std::string mix_desc;
  for (const auto& [policy, count] : mix) {
    if (!mix_desc.empty()) mix_desc += ",";
    mix_desc += policy.label() + "x" + std::to_string(count);
    for (int i = 0; i < count; ++i) {
      d.episodes.push_back(rollout_episode(env, policy, master.next_u64(), id));
      ++id;
    }
  }
  d.meta["env"] = env.spec().name;
  d.meta["mix"] = mix_desc;
  d.meta["seed"] = std::to_string(seed);
  return d;
}

inline double episodic_return(const Episode& e) { return trajdata::episode_return(e); }

}  // namespace oril::worldsim
