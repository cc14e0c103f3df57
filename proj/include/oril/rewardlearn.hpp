#pragma once

#include "oril/common.hpp"
#include "oril/diffcore.hpp"
#include "oril/rng.hpp"
#include "oril/trajdata.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oril::rewardlearn {

using trajdata::Origin;
using trajdata::SplitDataset;
using trajdata::SplitSampler;

struct EmptyConstraintSet : std::runtime_error {
  explicit EmptyConstraintSet(const std::string& which)
      : std::runtime_error("constraint set is empty: " + which) {}
};

enum class RewardMode : std::uint8_t { Bce, Pu, Trail };

inline const char* reward_mode_name(RewardMode m) {
  switch (m) {
    case RewardMode::Bce: return "bce";
    case RewardMode::Pu: return "pu";
    default: return "trail";
  }
}

// Early observations of demonstration and unlabeled episodes; the
// discriminability regularizer is computed on batches drawn from these.
struct ConstraintSets {
  Matrix expert_early;
  Matrix unlabeled_early;
};

// Demos plus the reward-training half of the unlabeled pool, first k states
// of each episode.
inline ConstraintSets build_constraint_sets(const SplitDataset& split, int k = 10) {
  ConstraintSets cs;
  cs.expert_early = trajdata::early_states(split.demos, k);
  cs.unlabeled_early = trajdata::early_states(split.unlabeled, split.unlabeled_half_a, k);
  if (cs.expert_early.rows() == 0) throw EmptyConstraintSet("expert early states");
  if (cs.unlabeled_early.rows() == 0) throw EmptyConstraintSet("unlabeled early states");
  return cs;
}

struct RewardConfig {
  int hidden_width = 64;
  int hidden_layers = 2;
  double eta = 0.5;           // positive-class prior for the PU estimator
  bool pu_clamp = false;      // nonnegativity clamp on the negative-risk term
  double augment_scale = 0.01;  // input noise, relative to per-coordinate data std
  int constraint_k = 10;
  diffcore::AdamConfig adam;
};

// -log of the floored sigmoid and its derivative w.r.t. the logit. The 1e-12
// probability floor turns into a value cap with zero slope past it.
namespace detail {

inline constexpr double kLogCap = 27.631021115928547;  // -log(1e-12)

inline void neg_log_sig(double z, double& v, double& g) {
  if (z < -kLogCap) {
    v = kLogCap;
    g = 0.0;
  } else {
    v = softplus(-z);
    g = -sigmoid(-z);
  }
}

inline void neg_log_one_minus_sig(double z, double& v, double& g) {
  if (z > kLogCap) {
    v = kLogCap;
    g = 0.0;
  } else {
    v = softplus(z);
    g = sigmoid(z);
  }
}

}  // namespace detail

// State-to-(0,1) discriminator with a frozen target copy for annotation.
struct RewardModel {
  diffcore::Approximator net;
  diffcore::TargetCopy target;
  RewardMode mode;
  RewardConfig cfg;
  Vector augment_stds;  // absolute per-coordinate noise std; empty until prepare()
  std::optional<ConstraintSets> constraints;
  diffcore::AdamState opt;

  RewardModel(int obs_dim, RewardMode mode_, RewardConfig cfg_ = {})
      : net(diffcore::Topology{obs_dim, cfg_.hidden_width, cfg_.hidden_layers, diffcore::HeadSpec::sigmoid_scalar()}),
        target(net),
        mode(mode_),
        cfg(cfg_),
        opt(net.param_count()) {}

  void init(RngStream& rng) {
    net.init_xavier(rng);
    target.sync(net);
  }

  // Computes augmentation scales from the states the model will train on
  // (demos plus the reward half) and materializes constraint pools.
  void prepare(const SplitDataset& split) {
    Matrix pool_a = trajdata::early_states(split.unlabeled, split.unlabeled_half_a,
                                           std::numeric_limits<int>::max());
    Matrix pool_e = trajdata::early_states(split.demos, std::numeric_limits<int>::max());
    Matrix all(pool_a.rows() + pool_e.rows(), pool_a.cols());
    all << pool_e, pool_a;
    Vector mean = all.colwise().mean();
    Vector var = (all.rowwise() - mean.transpose()).array().square().colwise().mean();
    augment_stds = cfg.augment_scale * var.array().sqrt();
    if (mode == RewardMode::Trail) constraints = build_constraint_sets(split, cfg.constraint_k);
  }

  // Predictions in (0,1) from the live network.
  Vector predict(const Matrix& states) const { return diffcore::sigmoid_probs(net.forward_raw(states)); }

  // Predictions from the frozen target copy; the annotation path.
  Vector predict_target(const Matrix& states) const {
    return diffcore::sigmoid_probs(target.net().forward_raw(states));
  }

  void sync_target() { target.sync(net); }
};

struct LossResult {
  double value = 0.0;
  Vector grad;
};

namespace detail {

struct SideGrad {
  double mean_nls = 0.0;        // mean -log R
  double mean_nlms = 0.0;       // mean -log(1-R)
  Vector g_nls, g_nlms;         // per-row logit gradients of each mean
  diffcore::Approximator::Trace trace;
  long rows = 0;
};

inline SideGrad side_terms(const diffcore::Approximator& net, const Matrix& states) {
  SideGrad s;
  Matrix raw = net.forward_raw(states, &s.trace);
  s.rows = raw.rows();
  s.g_nls.resize(s.rows);
  s.g_nlms.resize(s.rows);
  for (long i = 0; i < s.rows; ++i) {
    double v, g;
    neg_log_sig(raw(i, 0), v, g);
    s.mean_nls += v / s.rows;
    s.g_nls[i] = g / s.rows;
    neg_log_one_minus_sig(raw(i, 0), v, g);
    s.mean_nlms += v / s.rows;
    s.g_nlms[i] = g / s.rows;
  }
  return s;
}

}  // namespace detail

// Plain discrimination loss: mean -log R over expert states plus
// mean -log(1-R) over unlabeled states.
inline LossResult loss_bce(const RewardModel& m, const Matrix& expert_states, const Matrix& unlabeled_states) {
  if (expert_states.rows() == 0 || unlabeled_states.rows() == 0)
    throw std::invalid_argument("loss_bce: both batches must be nonempty");
  detail::SideGrad e = detail::side_terms(m.net, expert_states);
  detail::SideGrad u = detail::side_terms(m.net, unlabeled_states);
  LossResult r;
  r.value = e.mean_nls + u.mean_nlms;
  r.grad = m.net.backward_raw(e.trace, e.g_nls) + m.net.backward_raw(u.trace, u.g_nlms);
  return r;
}

// Positive-unlabeled estimator: eta*E_E[-log R] + E_U[-log(1-R)]
// - eta*E_E[-log(1-R)]. The optional clamp keeps the estimated negative risk
// (the last two terms together) nonnegative.
inline LossResult loss_pu(const RewardModel& m, const Matrix& expert_states, const Matrix& unlabeled_states,
                          double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("loss_pu: eta must lie in (0,1)");
  if (expert_states.rows() == 0 || unlabeled_states.rows() == 0)
    throw std::invalid_argument("loss_pu: both batches must be nonempty");
  detail::SideGrad e = detail::side_terms(m.net, expert_states);
  detail::SideGrad u = detail::side_terms(m.net, unlabeled_states);
  const double positive_risk = eta * e.mean_nls;
  const double negative_risk = u.mean_nlms - eta * e.mean_nlms;
  LossResult r;
  if (m.cfg.pu_clamp && negative_risk < 0.0) {
    r.value = positive_risk;
    r.grad = m.net.backward_raw(e.trace, (eta * e.g_nls).eval());
    return r;
  }
  r.value = positive_risk + negative_risk;
  Vector ge = eta * e.g_nls - eta * e.g_nlms;
  r.grad = m.net.backward_raw(e.trace, ge) + m.net.backward_raw(u.trace, u.g_nlms);
  return r;
}

// Mean prediction over a state set, live network.
inline double mean_prediction(const RewardModel& m, const Matrix& states) {
  return m.predict(states).mean();
}

// Discrimination loss minus the same loss on early-observation batches, with
// the subtraction active only while the model separates the early states the
// wrong way round: it switches on when unlabeled early observations are
// already scored below expert ones, and pushes that gap closed.
inline LossResult loss_trail(const RewardModel& m, const Matrix& expert_states, const Matrix& unlabeled_states,
                             const ConstraintSets& cs) {
  if (cs.expert_early.rows() == 0) throw EmptyConstraintSet("expert early states");
  if (cs.unlabeled_early.rows() == 0) throw EmptyConstraintSet("unlabeled early states");
  LossResult main = loss_bce(m, expert_states, unlabeled_states);
  const double mean_e = mean_prediction(m, cs.expert_early);
  const double mean_u = mean_prediction(m, cs.unlabeled_early);
  if (mean_e > mean_u) {
    LossResult constraint = loss_bce(m, cs.expert_early, cs.unlabeled_early);
    main.value -= constraint.value;
    main.grad -= constraint.grad;
  }
  return main;
}

// Hard origin labels used by the flat-reward baseline.
inline double flat_reward(Origin origin) { return origin == Origin::Expert ? 1.0 : 0.0; }

// Additive isotropic Gaussian noise.
inline Vector augment_state(const Vector& s, double scale, RngStream& rng) {
  if (scale < 0.0) throw std::invalid_argument("augment_state: scale must be >= 0");
  if (scale == 0.0) return s;
  Vector out = s;
  for (long i = 0; i < out.size(); ++i) out[i] += rng.normal(0.0, scale);
  return out;
}

// Per-coordinate noise, applied in place to a batch.
inline void augment_states(Matrix& states, const Vector& per_coord_std, RngStream& rng) {
  if (per_coord_std.size() == 0) return;
  if (per_coord_std.size() != states.cols())
    throw std::invalid_argument("augment_states: std vector does not match state width");
  for (long i = 0; i < states.rows(); ++i)
    for (long j = 0; j < states.cols(); ++j)
      if (per_coord_std[j] > 0.0) states(i, j) += rng.normal(0.0, per_coord_std[j]);
}

namespace detail {

inline Matrix sample_rows(const Matrix& pool, int n, RngStream& rng) {
  Matrix out(n, pool.cols());
  for (int i = 0; i < n; ++i)
    out.row(i) = pool.row(static_cast<long>(rng.integer(static_cast<std::uint64_t>(pool.rows()))));
  return out;
}

}  // namespace detail

// One optimizer step of the configured mode: expert batch from the demos,
// unlabeled batch from the reward-training half only, both augmented.
inline double reward_train_step(RewardModel& m, const SplitSampler& sampler, int batch_size, RngStream& rng) {
  if (batch_size < 1) throw std::invalid_argument("reward_train_step: batch_size must be >= 1");
  using trajdata::SamplePurpose;
  using trajdata::Source;
  Matrix expert = sampler.states({Source::Expert}, batch_size, rng, SamplePurpose::RewardExpert);
  Matrix unlabeled = sampler.states({Source::HalfA}, batch_size, rng, SamplePurpose::RewardUnlabeled);
  augment_states(expert, m.augment_stds, rng);
  augment_states(unlabeled, m.augment_stds, rng);
  LossResult r;
  switch (m.mode) {
    case RewardMode::Bce:
      r = loss_bce(m, expert, unlabeled);
      break;
    case RewardMode::Pu:
      r = loss_pu(m, expert, unlabeled, m.cfg.eta);
      break;
    default: {
      if (!m.constraints) throw EmptyConstraintSet("constraint pools not prepared");
      ConstraintSets batch;
      batch.expert_early = detail::sample_rows(m.constraints->expert_early, batch_size, rng);
      batch.unlabeled_early = detail::sample_rows(m.constraints->unlabeled_early, batch_size, rng);
      augment_states(batch.expert_early, m.augment_stds, rng);
      augment_states(batch.unlabeled_early, m.augment_stds, rng);
      r = loss_trail(m, expert, unlabeled, batch);
      break;
    }
  }
  diffcore::adam_step(m.net.params(), r.grad, m.opt, m.cfg.adam);
  return r.value;
}

inline double reward_train_step(RewardModel& m, const SplitDataset& split, int batch_size, RngStream& rng) {
  SplitSampler sampler(split);
  return reward_train_step(m, sampler, batch_size, rng);
}

// Reward estimates for critic targets: frozen-target prediction at the
// successor state, aligned with the batch rows.
inline Vector annotate(const RewardModel& m, const Matrix& next_states) { return m.predict_target(next_states); }

inline Vector annotate_flat(const std::vector<Origin>& origins) {
  Vector r(static_cast<long>(origins.size()));
  for (std::size_t i = 0; i < origins.size(); ++i) r[static_cast<long>(i)] = flat_reward(origins[i]);
  return r;
}

// Whole-dataset annotation, one estimate per transition (successor-state
// prediction), mostly for inspection and tests.
inline std::vector<Vector> annotate_dataset(const RewardModel& m, const trajdata::Dataset& d) {
  std::vector<Vector> out;
  out.reserve(d.episodes.size());
  for (const auto& e : d.episodes) {
    if (e.length() == 0) {
      out.emplace_back();
      continue;
    }
    out.push_back(m.predict_target(e.states.bottomRows(e.length())));
  }
  return out;
}

}  // namespace oril::rewardlearn
