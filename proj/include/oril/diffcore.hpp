#pragma once

#include "oril/common.hpp"
#include "oril/rng.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oril::diffcore {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteGradient : std::runtime_error {
  explicit NonFiniteGradient(const std::string& what) : std::runtime_error(what) {}
};
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

enum class Head : std::uint8_t { SigmoidScalar, Categorical, Gmm };

struct HeadSpec {
  Head kind = Head::SigmoidScalar;
  // Gmm
  int components = 5;
  int act_dim = 0;
  // Categorical
  int n_atoms = 51;
  double v_min = 0.0;
  double v_max = 100.0;

  static HeadSpec sigmoid_scalar() { return {Head::SigmoidScalar}; }
  static HeadSpec categorical(int n_atoms, double v_min, double v_max) {
    if (n_atoms < 2) throw std::invalid_argument("categorical head needs at least 2 atoms");
    if (!(v_max > v_min)) throw std::invalid_argument("categorical head needs v_max > v_min");
    HeadSpec h;
    h.kind = Head::Categorical;
    h.n_atoms = n_atoms;
    h.v_min = v_min;
    h.v_max = v_max;
    return h;
  }
  static HeadSpec gmm(int components, int act_dim) {
    if (components < 1 || act_dim < 1) throw std::invalid_argument("gmm head needs components >= 1, act_dim >= 1");
    HeadSpec h;
    h.kind = Head::Gmm;
    h.components = components;
    h.act_dim = act_dim;
    return h;
  }

  // Width of the raw (pre-head-transform) output layer.
  int raw_dim() const {
    switch (kind) {
      case Head::SigmoidScalar: return 1;
      case Head::Categorical: return n_atoms;
      default: return components * act_dim * 2 + components;  // means, raw stds, logits
    }
  }
};

// Evenly spaced support atoms for a categorical head.
inline Vector head_atoms(const HeadSpec& h) {
  Vector z(h.n_atoms);
  const double step = (h.v_max - h.v_min) / (h.n_atoms - 1);
  for (int i = 0; i < h.n_atoms; ++i) z[i] = h.v_min + step * i;
  return z;
}

// Fixed trunk: Dense -> LayerNorm -> tanh, then (hidden_layers-1) x
// (Dense -> tanh), then a linear head layer.
struct Topology {
  int input_dim = 0;
  int hidden_width = 64;
  int hidden_layers = 2;
  HeadSpec head;

  long param_count() const {
    long n = 0;
    int in = input_dim;
    for (int i = 0; i < hidden_layers; ++i) {
      n += static_cast<long>(in) * hidden_width + hidden_width;
      if (i == 0) n += 2L * hidden_width;  // layer-norm gain and shift
      in = hidden_width;
    }
    n += static_cast<long>(in) * head.raw_dim() + head.raw_dim();
    return n;
  }

  std::string descriptor() const {
    std::string s = "in" + std::to_string(input_dim) + ":h" + std::to_string(hidden_width) + "x" +
                    std::to_string(hidden_layers) + ":ln0:tanh:";
    switch (head.kind) {
      case Head::SigmoidScalar: s += "sigmoid"; break;
      case Head::Categorical:
        s += "cat" + std::to_string(head.n_atoms) + "[" + std::to_string(head.v_min) + "," +
             std::to_string(head.v_max) + "]";
        break;
      default: s += "gmm" + std::to_string(head.components) + "x" + std::to_string(head.act_dim); break;
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Approximator: flat-parameter MLP with exact hand-written reverse mode
// ---------------------------------------------------------------------------

class Approximator {
 public:
  // Everything a backward pass needs from the matching forward pass.
  struct Trace {
    std::vector<Matrix> inputs;       // input to each dense layer; inputs[0] is X
    std::vector<Matrix> activations;  // tanh output per hidden layer
    Matrix ln_xhat;                   // normalized first-layer pre-activation
    Vector ln_inv_sigma;              // per-row 1/sqrt(var+eps)
  };

  explicit Approximator(Topology topo) : topo_(std::move(topo)) {
    if (topo_.input_dim < 1 || topo_.hidden_width < 1 || topo_.hidden_layers < 1)
      throw std::invalid_argument("topology dimensions must be positive");
    long off = 0;
    int in = topo_.input_dim;
    for (int i = 0; i < topo_.hidden_layers; ++i) {
      dense_.push_back({off, off + static_cast<long>(in) * topo_.hidden_width, in, topo_.hidden_width});
      off += static_cast<long>(in) * topo_.hidden_width + topo_.hidden_width;
      if (i == 0) {
        ln_gamma_off_ = off;
        ln_beta_off_ = off + topo_.hidden_width;
        off += 2L * topo_.hidden_width;
      }
      in = topo_.hidden_width;
    }
    dense_.push_back({off, off + static_cast<long>(in) * topo_.head.raw_dim(), in, topo_.head.raw_dim()});
    off += static_cast<long>(in) * topo_.head.raw_dim() + topo_.head.raw_dim();
    params_ = Vector::Zero(off);
    set_layernorm_identity();
  }

  const Topology& topology() const { return topo_; }
  long param_count() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  void set_params(const Vector& p) {
    if (p.size() != params_.size()) throw ShapeError("parameter vector size mismatch");
    params_ = p;
  }

  // Uniform Xavier/Glorot weights, zero biases, identity layer norm.
  void init_xavier(RngStream& rng) {
    for (const DenseLayer& l : dense_) {
      const double limit = std::sqrt(6.0 / (l.in + l.out));
      for (long i = 0; i < static_cast<long>(l.in) * l.out; ++i)
        params_[l.w_off + i] = rng.uniform(-limit, limit);
      params_.segment(l.b_off, l.out).setZero();
    }
    set_layernorm_identity();
  }

  // Zeroes the head layer; gives sigmoid 0.5, uniform categorical masses and
  // uniform mixture weights regardless of input.
  void zero_final_layer() {
    const DenseLayer& l = dense_.back();
    params_.segment(l.w_off, static_cast<long>(l.in) * l.out).setZero();
    params_.segment(l.b_off, l.out).setZero();
  }

  // Raw head-layer output, one row per sample.
  Matrix forward_raw(const Matrix& X, Trace* trace = nullptr) const {
    if (X.cols() != topo_.input_dim)
      throw ShapeError("forward: input has " + std::to_string(X.cols()) + " columns, expected " +
                       std::to_string(topo_.input_dim));
    const long n = X.rows();
    const int w = topo_.hidden_width;
    if (trace) {
      trace->inputs.clear();
      trace->activations.clear();
    }
    Matrix cur = X;
    for (std::size_t i = 0; i + 1 < dense_.size(); ++i) {
      if (trace) trace->inputs.push_back(cur);
      Matrix z = apply_dense(dense_[i], cur);
      if (i == 0) {
        const Vector mu = z.rowwise().mean();
        Matrix centered = z.colwise() - mu;
        const Vector var = centered.array().square().rowwise().mean();
        const Vector inv_sigma = (var.array() + kLnEps).sqrt().inverse();
        Matrix xhat = centered.array().colwise() * inv_sigma.array();
        auto gamma = params_.segment(ln_gamma_off_, w);
        auto beta = params_.segment(ln_beta_off_, w);
        z = (xhat.array().rowwise() * gamma.transpose().array()).rowwise() + beta.transpose().array();
        if (trace) {
          trace->ln_xhat = std::move(xhat);
          trace->ln_inv_sigma = inv_sigma;
        }
      }
      cur = z.array().tanh();
      if (trace) trace->activations.push_back(cur);
    }
    if (trace) trace->inputs.push_back(cur);
    (void)n;
    return apply_dense(dense_.back(), cur);
  }

  // Exact gradient of any scalar reduction of the raw output: gout holds
  // d(loss)/d(raw), row-aligned with the traced forward. Returns the flat
  // parameter gradient; optionally also the gradient w.r.t. X.
  Vector backward_raw(const Trace& trace, const Matrix& gout, Matrix* dX = nullptr) const {
    if (trace.inputs.size() != dense_.size())
      throw ShapeError("backward: trace does not match a completed forward pass");
    if (gout.cols() != dense_.back().out || gout.rows() != trace.inputs.back().rows())
      throw ShapeError("backward: upstream gradient shape mismatch");
    const int w = topo_.hidden_width;
    Vector grad = Vector::Zero(params_.size());
    // g enters iteration li as d(loss)/d(activation feeding dense layer li+1),
    // i.e. the raw output for the head layer.
    Matrix g = gout;
    for (long li = static_cast<long>(dense_.size()) - 1; li >= 0; --li) {
      const DenseLayer& l = dense_[li];
      const bool is_hidden = li + 1 < static_cast<long>(dense_.size());
      if (is_hidden) {
        // through tanh
        g = g.array() * (1.0 - trace.activations[li].array().square());
        if (li == 0) {
          // through layer norm
          auto gamma = params_.segment(ln_gamma_off_, w);
          grad.segment(ln_gamma_off_, w) = (g.array() * trace.ln_xhat.array()).colwise().sum();
          grad.segment(ln_beta_off_, w) = g.colwise().sum();
          Matrix ggam = g.array().rowwise() * gamma.transpose().array();
          const Vector m1 = ggam.rowwise().mean();
          const Vector m2 = (ggam.array() * trace.ln_xhat.array()).rowwise().mean();
          g = ((ggam.colwise() - m1).array() - (trace.ln_xhat.array().colwise() * m2.array())).colwise() *
              trace.ln_inv_sigma.array();
        }
      }
      // g is now d(loss)/d(dense li raw output)
      const Matrix& in = trace.inputs[li];
      Eigen::Map<Matrix>(grad.data() + l.w_off, l.in, l.out).noalias() = in.transpose() * g;
      grad.segment(l.b_off, l.out) = g.colwise().sum();
      if (li > 0) {
        g = (g * weight(l).transpose()).eval();
      } else if (dX) {
        dX->noalias() = g * weight(l).transpose();
      }
    }
    return grad;
  }

 private:
  struct DenseLayer {
    long w_off, b_off;
    int in, out;
  };

  static constexpr double kLnEps = 1e-5;

  Eigen::Map<const Matrix> weight(const DenseLayer& l) const {
    return Eigen::Map<const Matrix>(params_.data() + l.w_off, l.in, l.out);
  }

  Matrix apply_dense(const DenseLayer& l, const Matrix& in) const {
    Matrix z = in * weight(l);
    z.rowwise() += params_.segment(l.b_off, l.out).transpose();
    return z;
  }

  void set_layernorm_identity() {
    params_.segment(ln_gamma_off_, topo_.hidden_width).setOnes();
    params_.segment(ln_beta_off_, topo_.hidden_width).setZero();
  }

  Topology topo_;
  Vector params_;
  std::vector<DenseLayer> dense_;
  long ln_gamma_off_ = 0, ln_beta_off_ = 0;
};

// Frozen snapshot used for bootstrapped targets; changes only through sync.
class TargetCopy {
 public:
  explicit TargetCopy(const Approximator& source) : net_(source) {}
  void sync(const Approximator& source) { net_.set_params(source.params()); }
  const Approximator& net() const { return net_; }
  const Vector& params() const { return net_.params(); }

 private:
  Approximator net_;
};

// ---------------------------------------------------------------------------
// Head math
// ---------------------------------------------------------------------------

// Row-wise softmax with max subtraction; rows sum to 1 exactly up to division
// rounding (renormalized).
inline Matrix softmax_rows(const Matrix& raw) {
  Matrix p = (raw.colwise() - raw.rowwise().maxCoeff()).array().exp();
  const Vector sums = p.rowwise().sum();
  return p.array().colwise() / sums.array();
}

inline Matrix log_softmax_rows(const Matrix& raw) {
  Matrix shifted = raw.colwise() - raw.rowwise().maxCoeff();
  const Vector lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

// Mean of a categorical distribution over its support.
inline double categorical_mean(const Vector& probs, const Vector& atoms) {
  if (probs.size() != atoms.size()) throw ShapeError("categorical_mean: probs/atoms size mismatch");
  return probs.dot(atoms);
}

inline Vector sigmoid_probs(const Matrix& raw) {
  if (raw.cols() != 1) throw ShapeError("sigmoid head expects a single raw column");
  Vector out(raw.rows());
  for (long i = 0; i < raw.rows(); ++i) out[i] = sigmoid(raw(i, 0));
  return out;
}

// --- Gaussian mixture head ---

inline constexpr double kGmmStdFloor = 1e-3;

struct GmmOutput {
  Matrix means;   // components x act_dim
  Matrix stds;    // components x act_dim, strictly positive
  Vector logits;  // components

  Vector weights() const {
    Vector w = (logits.array() - logits.maxCoeff()).exp();
    return w / w.sum();
  }
};

// Raw row layout: [means (K*act_dim) | std pre-activations (K*act_dim) | logits (K)],
// with component k, dim d at offset k*act_dim + d inside each block.
inline GmmOutput unpack_gmm(const HeadSpec& h, const Vector& raw_row) {
  if (h.kind != Head::Gmm) throw ShapeError("unpack_gmm: head is not a mixture head");
  const int K = h.components, A = h.act_dim;
  if (raw_row.size() != h.raw_dim()) throw ShapeError("unpack_gmm: raw row width mismatch");
  GmmOutput g;
  g.means.resize(K, A);
  g.stds.resize(K, A);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < A; ++d) {
      g.means(k, d) = raw_row[k * A + d];
      g.stds(k, d) = softplus(raw_row[K * A + k * A + d]) + kGmmStdFloor;
    }
  g.logits = raw_row.segment(2L * K * A, K);
  return g;
}

// Log density of the diagonal-covariance mixture at `action`.
inline double gmm_log_prob(const GmmOutput& g, const Vector& action) {
  const int K = static_cast<int>(g.means.rows());
  if (action.size() != g.means.cols()) throw ShapeError("gmm_log_prob: action dimension mismatch");
  Vector logw = g.logits.array() - g.logits.maxCoeff();
  logw.array() -= std::log(logw.array().exp().sum());
  Vector lp(K);
  for (int k = 0; k < K; ++k) {
    double acc = logw[k];
    for (long d = 0; d < action.size(); ++d) {
      const double z = (action[d] - g.means(k, d)) / g.stds(k, d);
      acc += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(g.stds(k, d)) - 0.5 * z * z;
    }
    lp[k] = acc;
  }
  return log_sum_exp(lp);
}

// Component per mixture weights, then a diagonal Gaussian draw, clipped to the
// action box.
inline Vector gmm_sample(const GmmOutput& g, RngStream& rng) {
  const Vector w = g.weights();
  const double u = rng.uniform();
  int k = 0;
  double acc = 0.0;
  for (; k < w.size() - 1; ++k) {
    acc += w[k];
    if (u < acc) break;
  }
  Vector a(g.means.cols());
  for (long d = 0; d < a.size(); ++d)
    a[d] = clamp_unit(g.means(k, d) + g.stds(k, d) * rng.normal());
  return a;
}

// Batched -log prob of given actions plus, optionally, its exact gradient
// w.r.t. the raw head rows. values[i] and draw.row(i) correspond to raw.row(i).
inline void gmm_neg_log_prob_raw(const HeadSpec& h, const Matrix& raw, const Matrix& actions, Vector& values,
                                 Matrix* draw = nullptr) {
  const int K = h.components, A = h.act_dim;
  const long n = raw.rows();
  if (raw.cols() != h.raw_dim()) throw ShapeError("gmm loss: raw width mismatch");
  if (actions.rows() != n || actions.cols() != A) throw ShapeError("gmm loss: action batch mismatch");
  values.resize(n);
  if (draw) draw->setZero(n, raw.cols());
  Vector lp(K), r(K);
  for (long i = 0; i < n; ++i) {
    // log weights
    Vector logits = raw.row(i).segment(2L * K * A, K);
    Vector logw = logits.array() - logits.maxCoeff();
    const double lse_w = std::log(logw.array().exp().sum());
    logw.array() -= lse_w;
    for (int k = 0; k < K; ++k) {
      double acc = logw[k];
      for (int d = 0; d < A; ++d) {
        const double mean = raw(i, k * A + d);
        const double srw = raw(i, K * A + k * A + d);
        const double std = softplus(srw) + kGmmStdFloor;
        const double z = (actions(i, d) - mean) / std;
        acc += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(std) - 0.5 * z * z;
      }
      lp[k] = acc;
    }
    const double total = log_sum_exp(lp);
    values[i] = -total;
    if (!draw) continue;
    r = (lp.array() - total).exp();  // component posteriors
    const Vector w = logw.array().exp();
    for (int k = 0; k < K; ++k) {
      for (int d = 0; d < A; ++d) {
        const double mean = raw(i, k * A + d);
        const double srw = raw(i, K * A + k * A + d);
        const double std = softplus(srw) + kGmmStdFloor;
        const double diff = actions(i, d) - mean;
        // d(-logp)/dmean and, chained through softplus, d(-logp)/d(std preact)
        (*draw)(i, k * A + d) = -r[k] * diff / (std * std);
        const double dlogp_dstd = r[k] * (diff * diff / (std * std * std) - 1.0 / std);
        (*draw)(i, K * A + k * A + d) = -dlogp_dstd * sigmoid(srw);
      }
      (*draw)(i, 2L * K * A + k) = w[k] - r[k];
    }
  }
}

// Batched mixture sampling straight from raw head rows.
inline Matrix gmm_sample_raw(const HeadSpec& h, const Matrix& raw, RngStream& rng) {
  const long n = raw.rows();
  Matrix out(n, h.act_dim);
  for (long i = 0; i < n; ++i) {
    GmmOutput g = unpack_gmm(h, raw.row(i));
    out.row(i) = gmm_sample(g, rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m, v;
  long t = 0;

  explicit AdamState(long n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

inline void adam_step(Vector& params, const Vector& grad, AdamState& state, const AdamConfig& cfg) {
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw ShapeError("adam_step: size mismatch");
  if (!grad.allFinite()) throw NonFiniteGradient("adam_step: gradient has non-finite entries");
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v.array() + (1.0 - cfg.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  params.array() -= cfg.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.eps);
}

// ---------------------------------------------------------------------------
// Finite-difference verification
// ---------------------------------------------------------------------------

// loss_fn: (const Approximator&) -> {value, flat gradient}. Probes random
// coordinates with central differences at step h and reports the worst
// relative error |fd - analytic| / max(1e-8, |fd| + |analytic|).
template <class LossFn>
double grad_check(Approximator& a, LossFn&& loss_fn, int n_probes, RngStream& rng, double h = 1e-5) {
  const auto [base_value, grad] = loss_fn(static_cast<const Approximator&>(a));
  (void)base_value;
  if (grad.size() != a.param_count()) throw ShapeError("grad_check: gradient size mismatch");
  double worst = 0.0;
  Vector& p = a.params();
  for (int probe = 0; probe < n_probes; ++probe) {
    const long i = static_cast<long>(rng.integer(static_cast<std::uint64_t>(p.size())));
    const double saved = p[i];
    p[i] = saved + h;
    const double up = loss_fn(static_cast<const Approximator&>(a)).first;
    p[i] = saved - h;
    const double down = loss_fn(static_cast<const Approximator&>(a)).first;
    p[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(fd - grad[i]) / std::max(1e-8, std::abs(fd) + std::abs(grad[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
// "ORILCK01" | count u32 | per entry: name (u32 len + bytes),
// topology descriptor (u32 len + bytes), param count u64, params binary64 LE.

namespace detail {
inline constexpr char kCheckpointMagic[8] = {'O', 'R', 'I', 'L', 'C', 'K', '0', '1'};
}

struct CheckpointEntry {
  std::string name;
  std::string descriptor;
  Vector params;
};

inline void write_checkpoint(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, const Approximator*>>& entries) {
  std::string buf;
  auto put = [&buf](const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); };
  auto put_u32 = [&](std::uint32_t v) { put(&v, 4); };
  auto put_str = [&](const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put(s.data(), s.size());
  };
  put(detail::kCheckpointMagic, 8);
  put_u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, net] : entries) {
    put_str(name);
    put_str(net->topology().descriptor());
    const std::uint64_t count = static_cast<std::uint64_t>(net->param_count());
    put(&count, 8);
    put(net->params().data(), sizeof(double) * count);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

inline std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open for reading: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw CheckpointError("truncated checkpoint: " + path.string());
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto get_str = [&]() {
    const std::uint32_t n = get_u32();
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  };
  need(8);
  if (std::memcmp(buf.data(), detail::kCheckpointMagic, 8) != 0)
    throw CheckpointError("bad checkpoint magic: " + path.string());
  pos = 8;
  const std::uint32_t count = get_u32();
  std::vector<CheckpointEntry> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out[i].name = get_str();
    out[i].descriptor = get_str();
    need(8);
    std::uint64_t n;
    std::memcpy(&n, buf.data() + pos, 8);
    pos += 8;
    need(sizeof(double) * n);
    out[i].params.resize(static_cast<long>(n));
    std::memcpy(out[i].params.data(), buf.data() + pos, sizeof(double) * n);
    pos += sizeof(double) * n;
  }
  return out;
}

// Restores one named entry into a compatible Approximator.
inline void load_entry(const std::vector<CheckpointEntry>& entries, const std::string& name, Approximator& into) {
  for (const CheckpointEntry& e : entries) {
    if (e.name != name) continue;
    if (e.descriptor != into.topology().descriptor())
      throw CheckpointError("checkpoint entry '" + name + "' has topology " + e.descriptor + ", expected " +
                            into.topology().descriptor());
    if (e.params.size() != into.param_count()) throw CheckpointError("parameter count mismatch for '" + name + "'");
    into.set_params(e.params);
    return;
  }
  throw CheckpointError("checkpoint has no entry named '" + name + "'");
}

}  // namespace oril::diffcore
