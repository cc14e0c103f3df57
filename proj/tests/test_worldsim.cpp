#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oril/worldsim.hpp"

using namespace oril;
using worldsim::BehaviorPolicy;
using worldsim::Env;

namespace {

double mean_return(const Env& env, const BehaviorPolicy& policy, int n_episodes,
                   std::uint64_t first_seed) {
  double total = 0.0;
  for (int i = 0; i < n_episodes; ++i)
    total += worldsim::episodic_return(worldsim::rollout_episode(env, policy, first_seed + i, i));
  return total / n_episodes;
}

bool datasets_equal(const trajdata::Dataset& a, const trajdata::Dataset& b) {
  if (a.obs_dim != b.obs_dim || a.act_dim != b.act_dim || a.meta != b.meta ||
      a.episodes.size() != b.episodes.size())
    return false;
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    const auto& x = a.episodes[i];
    const auto& y = b.episodes[i];
    if (x.id != y.id || !(x.states.array() == y.states.array()).all() ||
        !(x.actions.array() == y.actions.array()).all() ||
        !(x.gt_rewards.array() == y.gt_rewards.array()).all())
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a parked point mass far from the goal earns nothing") {
  const Env env = Env::point_reach();
  Vector s = env.reset(42);
  REQUIRE(std::hypot(s[0], s[1]) > 0.1);
  const Vector zero = Vector::Zero(2);
  for (int t = 0; t < env.spec().horizon; ++t) {
    auto r = env.step(s, zero, t);
    REQUIRE(r.reward == 0.0);
    REQUIRE(r.done == (t == env.spec().horizon - 1));
    s = r.next_state;
  }
}

TEST_CASE("a balanced pendulum earns the full per-step reward") {
  const Env env = Env::pendulum_swing();
  Vector upright(3);
  upright << 1.0, 0.0, 0.0;
  const Vector zero = Vector::Zero(1);
  auto r = env.step(upright, zero, 0);
  REQUIRE(r.reward == 1.0);
  REQUIRE(r.next_state[0] == 1.0);
}

TEST_CASE("the scripted controller reaches the goal and keeps scoring") {
  const Env env = Env::point_reach();
  trajdata::Episode e = worldsim::rollout_episode(env, BehaviorPolicy::scripted_expert(), 42, 0);
  const double ret = worldsim::episodic_return(e);
  REQUIRE(ret > 50.0);
  // Once inside the goal region the controller stays: the reward tail is flat.
  REQUIRE(e.gt_rewards[e.length() - 1] == 1.0);
}

TEST_CASE("out-of-range actions and step indices are rejected") {
  const Env env = Env::point_reach();
  Vector s = env.reset(1);
  Vector bad(2);
  bad << 1.5, 0.0;
  REQUIRE_THROWS_AS(env.step(s, bad, 0), worldsim::ActionRangeError);
  Vector nan_a(2);
  nan_a << std::nan(""), 0.0;
  REQUIRE_THROWS_AS(env.step(s, nan_a, 0), worldsim::ActionRangeError);
  const Vector zero = Vector::Zero(2);
  REQUIRE_THROWS_AS(env.step(s, zero, env.spec().horizon), std::invalid_argument);
}

TEST_CASE("noise-free perturbed control equals the scripted controller") {
  for (const Env& env : {Env::point_reach(), Env::pendulum_swing()}) {
    trajdata::Episode a = worldsim::rollout_episode(env, BehaviorPolicy::scripted_expert(), 7, 0);
    trajdata::Episode b = worldsim::rollout_episode(env, BehaviorPolicy::noisy_expert(0.0), 7, 0);
    REQUIRE((a.states.array() == b.states.array()).all());
    REQUIRE((a.actions.array() == b.actions.array()).all());
  }
}

TEST_CASE("random-policy actions fill the unit box") {
  const Env env = Env::point_reach();
  RngStream rng(99);
  Vector s = env.reset(99);
  double lo = 1.0, hi = -1.0;
  for (int i = 0; i < 100000; ++i) {
    Vector a = worldsim::act(env, BehaviorPolicy::random(), s, rng);
    for (int d = 0; d < 2; ++d) {
      REQUIRE(a[d] >= -1.0);
      REQUIRE(a[d] <= 1.0);
      lo = std::min(lo, a[d]);
      hi = std::max(hi, a[d]);
    }
  }
  REQUIRE(lo < -0.99);
  REQUIRE(hi > 0.99);
}

TEST_CASE("perturbed-control noise is centered on the scripted action") {
  const Env env = Env::point_reach();
  Vector s(4);
  s << 0.1, -0.05, 0.0, 0.0;  // interior actions, so clipping cannot bias the mean
  const Vector expert = env.expert_action(s);
  const double sigma = 0.1;
  const int n = 100000;
  RngStream rng(123);
  Vector sum = Vector::Zero(2);
  for (int i = 0; i < n; ++i) sum += worldsim::act(env, BehaviorPolicy::noisy_expert(sigma), s, rng);
  const Vector mean = sum / n;
  const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  REQUIRE(std::abs(mean[0] - expert[0]) < tol);
  REQUIRE(std::abs(mean[1] - expert[1]) < tol);
}

TEST_CASE("random episodes on the sparse task score near zero") {
  const Env env = Env::point_reach();
  trajdata::Dataset d = worldsim::generate_dataset(env, {{BehaviorPolicy::random(), 5}}, 17);
  REQUIRE(d.episodes.size() == 5);
  double total = 0.0;
  for (const auto& e : d.episodes) total += worldsim::episodic_return(e);
  REQUIRE(total / 5.0 < 5.0);
}

TEST_CASE("behavior quality is ordered: scripted, perturbed, random") {
  struct Row {
    Env env;
    double expert_floor;
  };
  const Row rows[] = {{Env::point_reach(), 80.0}, {Env::pendulum_swing(), 160.0}};
  for (const Row& row : rows) {
    const double expert = mean_return(row.env, BehaviorPolicy::scripted_expert(), 20, 1000);
    const double noisy = mean_return(row.env, BehaviorPolicy::noisy_expert(0.5), 20, 1000);
    const double random = mean_return(row.env, BehaviorPolicy::random(), 20, 1000);
    CAPTURE(row.env.spec().name, expert, noisy, random);
    REQUIRE(expert > noisy);
    REQUIRE(noisy > random);
    REQUIRE(expert > row.expert_floor);
  }
}

TEST_CASE("generated rewards respect the task's reward regime") {
  auto mix = std::vector<std::pair<BehaviorPolicy, int>>{
      {BehaviorPolicy::scripted_expert(), 2}, {BehaviorPolicy::noisy_expert(0.5), 2},
      {BehaviorPolicy::random(), 2}};

  trajdata::Dataset sparse = worldsim::generate_dataset(Env::point_reach(), mix, 6);
  for (const auto& e : sparse.episodes)
    for (long t = 0; t < e.gt_rewards.size(); ++t)
      REQUIRE((e.gt_rewards[t] == 0.0 || e.gt_rewards[t] == 1.0));

  trajdata::Dataset dense = worldsim::generate_dataset(Env::pendulum_swing(), mix, 6);
  for (const auto& e : dense.episodes)
    for (long t = 0; t < e.gt_rewards.size(); ++t) {
      REQUIRE(e.gt_rewards[t] >= 0.0);
      REQUIRE(e.gt_rewards[t] <= 1.0);
    }
}

TEST_CASE("generation is deterministic in the seed and stable under mix prefixes") {
  const Env env = Env::point_reach();
  auto mix = std::vector<std::pair<BehaviorPolicy, int>>{{BehaviorPolicy::random(), 3}};
  trajdata::Dataset a = worldsim::generate_dataset(env, mix, 9);
  trajdata::Dataset b = worldsim::generate_dataset(env, mix, 9);
  REQUIRE(datasets_equal(a, b));

  trajdata::Dataset c = worldsim::generate_dataset(env, mix, 10);
  REQUIRE(!(a.episodes[0].states.array() == c.episodes[0].states.array()).all());

  // Extending the mix appends episodes without disturbing the prefix.
  auto longer = std::vector<std::pair<BehaviorPolicy, int>>{{BehaviorPolicy::random(), 5}};
  trajdata::Dataset d = worldsim::generate_dataset(env, longer, 9);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(d.episodes[i].id == a.episodes[i].id);
    REQUIRE((d.episodes[i].states.array() == a.episodes[i].states.array()).all());
    REQUIRE((d.episodes[i].actions.array() == a.episodes[i].actions.array()).all());
  }

  REQUIRE(a.meta.at("env") == "point_reach");
  REQUIRE(a.meta.at("seed") == "9");
  REQUIRE(a.meta.at("mix") == "randomx3");
}

TEST_CASE("episode returns match an independent summation") {
  trajdata::Dataset d = worldsim::generate_dataset(Env::pendulum_swing(),
                                                   {{BehaviorPolicy::noisy_expert(0.3), 3}}, 21);
  for (const auto& e : d.episodes) {
    double hand = 0.0;
    for (long t = 0; t < e.gt_rewards.size(); ++t) hand += e.gt_rewards[t];
    REQUIRE(worldsim::episodic_return(e) == Catch::Approx(hand).epsilon(1e-15));
  }
}
