#pragma once

#include "oril/common.hpp"
#include "oril/diffcore.hpp"
#include "oril/rewardlearn.hpp"
#include "oril/rng.hpp"
#include "oril/trajdata.hpp"
#include "oril/worldsim.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace oril::crragent {

using rewardlearn::RewardModel;
using trajdata::Origin;
using trajdata::SplitDataset;
using trajdata::SplitSampler;
using trajdata::TransitionBatch;

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

enum class TrainMethod : std::uint8_t { BcPos, BcAll, Fr, OrilR, OrilP, OrilT, CrrGt };

inline const char* method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::BcPos: return "bc_pos";
    case TrainMethod::BcAll: return "bc_all";
    case TrainMethod::Fr: return "fr";
    case TrainMethod::OrilR: return "oril_r";
    case TrainMethod::OrilP: return "oril_p";
    case TrainMethod::OrilT: return "oril_t";
    default: return "crr_gt";
  }
}

inline TrainMethod parse_method(const std::string& s) {
  for (TrainMethod m : {TrainMethod::BcPos, TrainMethod::BcAll, TrainMethod::Fr, TrainMethod::OrilR,
                        TrainMethod::OrilP, TrainMethod::OrilT, TrainMethod::CrrGt})
    if (s == method_name(m)) return m;
  throw ConfigError("unknown method: " + s);
}

inline bool method_uses_reward_model(TrainMethod m) {
  return m == TrainMethod::OrilR || m == TrainMethod::OrilP || m == TrainMethod::OrilT;
}
inline bool method_uses_critic(TrainMethod m) { return m != TrainMethod::BcPos && m != TrainMethod::BcAll; }

// ---------------------------------------------------------------------------
// Agent bundle
// ---------------------------------------------------------------------------

struct AgentConfig {
  double gamma = 0.99;
  int target_sync_period = 100;  // N
  int value_samples = 4;         // m, actions averaged for the state-value estimate
  int batch_per_source = 256;
  int hidden_width = 64;
  int hidden_layers = 2;
  int gmm_components = 5;
  int n_atoms = 51;
  double v_min = 0.0;
  double v_max = 100.0;
  diffcore::AdamConfig adam;
};

// Policy, critic and their frozen target copies; the critic scores
// state-action pairs as a categorical distribution over fixed return atoms.
struct AgentBundle {
  AgentConfig cfg;
  int obs_dim, act_dim;
  diffcore::Approximator policy;
  diffcore::Approximator critic;
  diffcore::TargetCopy policy_target;
  diffcore::TargetCopy critic_target;
  diffcore::AdamState policy_opt;
  diffcore::AdamState critic_opt;
  Vector atoms;

  AgentBundle(int obs_dim_, int act_dim_, AgentConfig cfg_ = {})
      : cfg(cfg_),
        obs_dim(obs_dim_),
        act_dim(act_dim_),
        policy(diffcore::Topology{obs_dim_, cfg_.hidden_width, cfg_.hidden_layers,
                                  diffcore::HeadSpec::gmm(cfg_.gmm_components, act_dim_)}),
        critic(diffcore::Topology{obs_dim_ + act_dim_, cfg_.hidden_width, cfg_.hidden_layers,
                                  diffcore::HeadSpec::categorical(cfg_.n_atoms, cfg_.v_min, cfg_.v_max)}),
        policy_target(policy),
        critic_target(critic),
        policy_opt(policy.param_count()),
        critic_opt(critic.param_count()),
        atoms(diffcore::head_atoms(critic.topology().head)) {
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    if (cfg.target_sync_period < 1) throw std::invalid_argument("target sync period must be >= 1");
    if (cfg.value_samples < 1) throw std::invalid_argument("value_samples must be >= 1");
  }

  void init(RngStream& rng) {
    policy.init_xavier(rng);
    critic.init_xavier(rng);
    sync_targets();
  }

  void sync_targets() {
    policy_target.sync(policy);
    critic_target.sync(critic);
  }
};

inline Matrix join_state_action(const Matrix& states, const Matrix& actions) {
  Matrix x(states.rows(), states.cols() + actions.cols());
  x << states, actions;
  return x;
}

// ---------------------------------------------------------------------------
// Distributional machinery
// ---------------------------------------------------------------------------

// Projects a weighted set of scalar values onto an evenly spaced support:
// each value is clamped to the support range and its mass split linearly
// between the two neighboring atoms.
inline Vector categorical_projection(const Vector& values, const Vector& probs, const Vector& support) {
  if (values.size() != probs.size()) throw diffcore::ShapeError("projection: values/probs size mismatch");
  if (support.size() < 2) throw diffcore::ShapeError("projection: support needs at least 2 atoms");
  const long n = support.size();
  const double v_min = support[0], v_max = support[n - 1];
  const double dz = (v_max - v_min) / static_cast<double>(n - 1);
  Vector out = Vector::Zero(n);
  for (long j = 0; j < values.size(); ++j) {
    const double v = std::clamp(values[j], v_min, v_max);
    const double b = (v - v_min) / dz;
    const long lo = static_cast<long>(std::floor(b));
    const long hi = std::min(lo + 1, n - 1);
    const double frac = b - static_cast<double>(lo);
    out[lo] += probs[j] * (1.0 - frac);
    out[hi] += probs[j] * frac;
  }
  return out;
}

// Scalar critic value of each (state, action) row: mean of the predicted
// categorical distribution.
inline Vector critic_values(const diffcore::Approximator& critic, const Vector& atoms, const Matrix& states,
                            const Matrix& actions) {
  Matrix probs = diffcore::softmax_rows(critic.forward_raw(join_state_action(states, actions)));
  return probs * atoms;
}

// Mean critic value over m policy-sampled actions per state (Monte Carlo
// estimate of the policy's state value under the current critic).
inline Vector estimate_policy_values(const AgentBundle& b, const Matrix& states, RngStream& rng) {
  const long n = states.rows();
  const int m = b.cfg.value_samples;
  Matrix raw = b.policy.forward_raw(states);
  Matrix joined(n * m, b.obs_dim + b.act_dim);
  for (int k = 0; k < m; ++k) {
    Matrix actions = diffcore::gmm_sample_raw(b.policy.topology().head, raw, rng);
    joined.middleRows(static_cast<long>(k) * n, n) << states, actions;
  }
  Matrix probs = diffcore::softmax_rows(b.critic.forward_raw(joined));
  Vector all = probs * b.atoms;
  Vector out = Vector::Zero(n);
  for (int k = 0; k < m; ++k) out += all.segment(static_cast<long>(k) * n, n);
  return out / static_cast<double>(m);
}

inline double estimate_policy_value(const AgentBundle& b, const Vector& state, RngStream& rng) {
  Matrix s(1, state.size());
  s.row(0) = state;
  return estimate_policy_values(b, s, rng)[0];
}

// ---------------------------------------------------------------------------
// Losses and updates
// ---------------------------------------------------------------------------

// Bootstrapped target distribution: for every row, draw one successor action
// from the frozen target policy, shift the target critic's distribution by
// r + gamma*z, and project it onto the support. No gradient flows through it.
inline Matrix critic_target_distribution(const AgentBundle& b, const TransitionBatch& batch,
                                         const Vector& rewards, RngStream& rng) {
  const long n = batch.size();
  if (rewards.size() != n)
    throw diffcore::ShapeError("critic_target_distribution: rewards not aligned with batch");
  Matrix next_raw = b.policy_target.net().forward_raw(batch.next_states);
  Matrix next_actions = diffcore::gmm_sample_raw(b.policy_target.net().topology().head, next_raw, rng);
  Matrix next_probs = diffcore::softmax_rows(
      b.critic_target.net().forward_raw(join_state_action(batch.next_states, next_actions)));
  Matrix target(n, b.atoms.size());
  for (long i = 0; i < n; ++i) {
    const Vector shifted = (rewards[i] + b.cfg.gamma * b.atoms.array()).matrix();
    target.row(i) = categorical_projection(shifted, next_probs.row(i), b.atoms);
  }
  return target;
}

// Mean cross-entropy between a fixed per-row target distribution and the
// critic's predicted distribution at the joined (state, action) inputs.
inline std::pair<double, Vector> critic_ce_loss(const diffcore::Approximator& critic, const Matrix& joined,
                                                const Matrix& target) {
  const long n = joined.rows();
  diffcore::Approximator::Trace trace;
  Matrix raw = critic.forward_raw(joined, &trace);
  Matrix logq = diffcore::log_softmax_rows(raw);
  const double loss = -(target.array() * logq.array()).rowwise().sum().mean();
  Matrix g = (diffcore::softmax_rows(raw) - target) / static_cast<double>(n);
  return {loss, critic.backward_raw(trace, g)};
}

// One distributional Bellman step: build the target, minimize cross-entropy
// against the live critic's prediction, apply one optimizer step.
inline double critic_update(AgentBundle& b, const TransitionBatch& batch, const Vector& rewards,
                            RngStream& rng) {
  Matrix target = critic_target_distribution(b, batch, rewards, rng);
  auto [loss, grad] = critic_ce_loss(b.critic, join_state_action(batch.states, batch.actions), target);
  diffcore::adam_step(b.critic.params(), grad, b.critic_opt, b.cfg.adam);
  return loss;
}

struct PolicyLossResult {
  double value = 0.0;
  Vector grad;
  double indicator_rate = 0.0;
};

// Mean of indicator-weighted -log pi(a|s) over the batch; the per-row weights
// are fixed inputs here, so the value is an exact differentiable function of
// the policy parameters.
inline PolicyLossResult weighted_bc_loss(const diffcore::Approximator& policy, const Matrix& states,
                                         const Matrix& actions, const std::vector<char>& indicator) {
  const long n = states.rows();
  if (static_cast<long>(indicator.size()) != n)
    throw diffcore::ShapeError("weighted_bc_loss: indicator not aligned with batch");
  diffcore::Approximator::Trace trace;
  Matrix raw = policy.forward_raw(states, &trace);
  Vector values;
  Matrix draw;
  diffcore::gmm_neg_log_prob_raw(policy.topology().head, raw, actions, values, &draw);
  PolicyLossResult r;
  long active = 0;
  for (long i = 0; i < n; ++i) {
    if (indicator[i]) {
      r.value += values[i] / static_cast<double>(n);
      ++active;
    } else {
      draw.row(i).setZero();
    }
  }
  draw /= static_cast<double>(n);
  r.grad = policy.backward_raw(trace, draw);
  r.indicator_rate = static_cast<double>(active) / static_cast<double>(n);
  return r;
}

// Plain behavior cloning: every row counts.
inline PolicyLossResult bc_loss(const diffcore::Approximator& policy, const Matrix& states,
                                const Matrix& actions) {
  return weighted_bc_loss(policy, states, actions, std::vector<char>(states.rows(), 1));
}

inline PolicyLossResult bc_loss(const diffcore::Approximator& policy, const TransitionBatch& batch) {
  return bc_loss(policy, batch.states, batch.actions);
}

// Rows count only where the stored action beats the current policy according
// to the current critic; the comparison is strict and contributes no gradient.
inline std::vector<char> advantage_indicator(const AgentBundle& b, const TransitionBatch& batch,
                                             RngStream& rng) {
  Vector q = critic_values(b.critic, b.atoms, batch.states, batch.actions);
  Vector v = estimate_policy_values(b, batch.states, rng);
  std::vector<char> ind(batch.size());
  for (long i = 0; i < batch.size(); ++i) ind[i] = q[i] > v[i] ? 1 : 0;
  return ind;
}

inline PolicyLossResult crr_policy_loss(const AgentBundle& b, const TransitionBatch& batch, RngStream& rng) {
  return weighted_bc_loss(b.policy, batch.states, batch.actions, advantage_indicator(b, batch, rng));
}

// ---------------------------------------------------------------------------
// Ground-truth reward lookup (upper-bound method only)
// ---------------------------------------------------------------------------

// Separate side table keyed by episode id; the split datasets themselves are
// stripped, so gt rewards can only enter training through an explicit table.
struct GtRewardTable {
  std::unordered_map<std::uint64_t, Vector> rewards;

  static GtRewardTable from_raw(const trajdata::Dataset& raw) {
    if (!raw.has_gt_rewards()) throw trajdata::MissingGroundTruth();
    GtRewardTable t;
    for (const auto& e : raw.episodes) t.rewards.emplace(e.id, e.gt_rewards);
    return t;
  }

  Vector lookup(const TransitionBatch& batch) const {
    Vector r(batch.size());
    for (long i = 0; i < batch.size(); ++i) {
      auto it = rewards.find(batch.episode_ids[i]);
      if (it == rewards.end())
        throw ConfigError("ground-truth table has no episode " + std::to_string(batch.episode_ids[i]));
      r[i] = it->second[batch.t_index[i]];
    }
    return r;
  }
};

// ---------------------------------------------------------------------------
// Trainer: one full training loop step per call
// ---------------------------------------------------------------------------

struct StepMetrics {
  long step = 0;
  double reward_loss = 0.0;
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double indicator_rate = 0.0;
};

class Trainer {
 public:
  Trainer(TrainMethod method, const SplitDataset& split, AgentConfig agent_cfg,
          rewardlearn::RewardConfig reward_cfg, std::uint64_t seed, const GtRewardTable* gt = nullptr)
      : method_(method),
        split_(&split),
        sampler_(split),
        bundle_(split.demos.obs_dim, split.demos.act_dim, agent_cfg),
        gt_(gt),
        rng_reward_(RngStream(seed, 21)),
        rng_batch_(RngStream(seed, 22)),
        rng_policy_(RngStream(seed, 23)),
        rng_critic_(RngStream(seed, 24)) {
    if (method == TrainMethod::CrrGt && !gt)
      throw ConfigError("crr_gt requires a ground-truth reward table");
    RngStream init_rng(seed, 20);
    bundle_.init(init_rng);
    if (method_uses_reward_model(method)) {
      rewardlearn::RewardMode mode = method == TrainMethod::OrilR   ? rewardlearn::RewardMode::Bce
                                     : method == TrainMethod::OrilP ? rewardlearn::RewardMode::Pu
                                                                    : rewardlearn::RewardMode::Trail;
      reward_.emplace(split.demos.obs_dim, mode, reward_cfg);
      reward_->init(init_rng);
      reward_->prepare(split);
    }
  }

  SplitSampler& sampler() { return sampler_; }
  const AgentBundle& bundle() const { return bundle_; }
  AgentBundle& bundle() { return bundle_; }
  RewardModel* reward_model() { return reward_ ? &*reward_ : nullptr; }
  TrainMethod method() const { return method_; }
  long step_count() const { return step_; }

  StepMetrics train_step() {
    StepMetrics m;
    m.step = ++step_;
    const int bps = bundle_.cfg.batch_per_source;
    using trajdata::SamplePurpose;
    using trajdata::Source;
    switch (method_) {
      case TrainMethod::BcPos: {
        TransitionBatch batch =
            sampler_.transitions({Source::Expert}, 3 * bps, rng_batch_, SamplePurpose::AgentBatch);
        PolicyLossResult r = bc_loss(bundle_.policy, batch);
        diffcore::adam_step(bundle_.policy.params(), r.grad, bundle_.policy_opt, bundle_.cfg.adam);
        m.policy_loss = r.value;
        m.indicator_rate = 1.0;
        break;
      }
      case TrainMethod::BcAll: {
        TransitionBatch batch = sampler_.transitions({Source::Expert, Source::HalfA, Source::HalfB}, 3 * bps,
                                                     rng_batch_, SamplePurpose::AgentBatch);
        PolicyLossResult r = bc_loss(bundle_.policy, batch);
        diffcore::adam_step(bundle_.policy.params(), r.grad, bundle_.policy_opt, bundle_.cfg.adam);
        m.policy_loss = r.value;
        m.indicator_rate = 1.0;
        break;
      }
      default: {
        if (reward_) m.reward_loss = rewardlearn::reward_train_step(*reward_, sampler_, bps, rng_reward_);
        TransitionBatch batch = concat_agent_batch(bps);
        Vector rewards = annotate_batch(batch);
        m.critic_loss = critic_update(bundle_, batch, rewards, rng_critic_);
        PolicyLossResult r = crr_policy_loss(bundle_, batch, rng_policy_);
        diffcore::adam_step(bundle_.policy.params(), r.grad, bundle_.policy_opt, bundle_.cfg.adam);
        m.policy_loss = r.value;
        m.indicator_rate = r.indicator_rate;
        break;
      }
    }
    if (step_ % bundle_.cfg.target_sync_period == 0) {
      bundle_.sync_targets();
      if (reward_) reward_->sync_target();
    }
    return m;
  }

 private:
  // Per-source batches concatenated unaugmented: demos, then each unlabeled
  // half, giving a fixed 1:2 expert-to-unlabeled row ratio.
  TransitionBatch concat_agent_batch(int bps) {
    using trajdata::SamplePurpose;
    using trajdata::Source;
    TransitionBatch e = sampler_.transitions({Source::Expert}, bps, rng_batch_, SamplePurpose::AgentBatch);
    TransitionBatch a = sampler_.transitions({Source::HalfA}, bps, rng_batch_, SamplePurpose::AgentBatch);
    TransitionBatch b = sampler_.transitions({Source::HalfB}, bps, rng_batch_, SamplePurpose::AgentBatch);
    TransitionBatch out;
    const long n = e.size() + a.size() + b.size();
    out.states.resize(n, e.states.cols());
    out.actions.resize(n, e.actions.cols());
    out.next_states.resize(n, e.next_states.cols());
    out.states << e.states, a.states, b.states;
    out.actions << e.actions, a.actions, b.actions;
    out.next_states << e.next_states, a.next_states, b.next_states;
    for (const TransitionBatch* part : {&e, &a, &b}) {
      out.origin.insert(out.origin.end(), part->origin.begin(), part->origin.end());
      out.episode_ids.insert(out.episode_ids.end(), part->episode_ids.begin(), part->episode_ids.end());
      out.t_index.insert(out.t_index.end(), part->t_index.begin(), part->t_index.end());
    }
    return out;
  }

  Vector annotate_batch(const TransitionBatch& batch) {
    switch (method_) {
      case TrainMethod::Fr: return rewardlearn::annotate_flat(batch.origin);
      case TrainMethod::CrrGt: return gt_->lookup(batch);
      default: return rewardlearn::annotate(*reward_, batch.next_states);
    }
  }

  TrainMethod method_;
  const SplitDataset* split_;
  SplitSampler sampler_;
  AgentBundle bundle_;
  std::optional<RewardModel> reward_;
  const GtRewardTable* gt_;
  RngStream rng_reward_, rng_batch_, rng_policy_, rng_critic_;
  long step_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Ground-truth mean return of the policy over seeded episodes. Actions come
// from the mixture head: sampled when sample_actions is set, otherwise the
// highest-weight component's mean. Always clipped.
inline double evaluate(const diffcore::Approximator& policy, const worldsim::Env& env, int n_episodes,
                       std::uint64_t seed, bool sample_actions = true) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  const auto& head = policy.topology().head;
  double total = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    RngStream rng(seed, 31 + static_cast<std::uint64_t>(ep));
    Vector state = env.reset(rng.next_u64());
    double ret = 0.0;
    for (int t = 0; t < env.spec().horizon; ++t) {
      Matrix s(1, state.size());
      s.row(0) = state;
      diffcore::GmmOutput g = diffcore::unpack_gmm(head, policy.forward_raw(s).row(0));
      Vector action(env.spec().act_dim);
      if (sample_actions) {
        action = diffcore::gmm_sample(g, rng);
      } else {
        Vector w = g.weights();
        long best;
        w.maxCoeff(&best);
        for (long d = 0; d < action.size(); ++d) action[d] = clamp_unit(g.means(best, d));
      }
      worldsim::StepResult r = env.step(state, action, t);
      ret += r.reward;
      state = std::move(r.next_state);
    }
    total += ret;
  }
  return total / n_episodes;
}

}  // namespace oril::crragent
