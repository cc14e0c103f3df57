#pragma once

#include "oril/common.hpp"
#include "oril/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oril::trajdata {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct MissingGroundTruth : std::runtime_error {
  MissingGroundTruth() : std::runtime_error("episode lacks ground-truth rewards") {}
};
struct EmptyDemoSet : std::runtime_error {
  EmptyDemoSet() : std::runtime_error("demonstration set came out empty; reseed or raise inclusion probability") {}
};
struct EmptyDataset : std::runtime_error {
  EmptyDataset() : std::runtime_error("dataset is empty") {}
};
struct EmptySource : std::runtime_error {
  explicit EmptySource(const std::string& which) : std::runtime_error("sample source is empty: " + which) {}
};
struct FormatError : std::runtime_error {
  std::size_t byte_offset;
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
};
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// One trajectory. states holds T+1 rows, actions T rows; gt_rewards is either
// empty or holds T entries and exists only in freshly generated raw data.
struct Episode {
  std::uint64_t id = 0;
  Matrix states;      // (T+1) x obs_dim
  Matrix actions;     // T x act_dim
  Vector gt_rewards;  // T or 0

  int length() const { return static_cast<int>(actions.rows()); }
  bool has_gt() const { return gt_rewards.size() > 0; }
};

struct Dataset {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Episode> episodes;
  std::map<std::string, std::string> meta;

  bool empty() const { return episodes.empty(); }
  bool has_gt_rewards() const {
    return !episodes.empty() &&
           std::all_of(episodes.begin(), episodes.end(), [](const Episode& e) { return e.has_gt(); });
  }
  long total_transitions() const {
    long n = 0;
    for (const auto& e : episodes) n += e.length();
    return n;
  }
  long total_states() const {
    long n = 0;
    for (const auto& e : episodes) n += e.length() + 1;
    return n;
  }
};

inline void validate_dataset(const Dataset& d) {
  if (d.obs_dim <= 0 || d.act_dim <= 0) throw SchemaError("dataset dimensions must be positive");
  bool any_gt = false, any_no_gt = false;
  for (const auto& e : d.episodes) {
    if (e.states.rows() != e.actions.rows() + 1)
      throw SchemaError("episode " + std::to_string(e.id) + ": states must hold one more row than actions");
    if (e.states.cols() != d.obs_dim || (e.actions.rows() > 0 && e.actions.cols() != d.act_dim))
      throw SchemaError("episode " + std::to_string(e.id) + ": dimension mismatch");
    if (e.has_gt() && e.gt_rewards.size() != e.actions.rows())
      throw SchemaError("episode " + std::to_string(e.id) + ": gt_rewards length mismatch");
    (e.has_gt() ? any_gt : any_no_gt) = true;
  }
  if (any_gt && any_no_gt) throw SchemaError("gt_rewards must be present on all episodes or none");
}

// The D_E / D_U partition plus the unlabeled halving used for reward training.
// demos and unlabeled hold disjoint episode ids; half_a/half_b index into
// unlabeled.episodes and partition it.
struct SplitDataset {
  Dataset demos;      // D_E
  Dataset unlabeled;  // D_U
  std::vector<int> unlabeled_half_a;
  std::vector<int> unlabeled_half_b;
};

enum class Origin : std::uint8_t { Expert, Unlabeled };

struct TransitionBatch {
  Matrix states;       // n x obs_dim
  Matrix actions;      // n x act_dim
  Matrix next_states;  // n x obs_dim
  std::vector<Origin> origin;
  std::vector<std::uint64_t> episode_ids;  // provenance, per row
  std::vector<int> t_index;

  int size() const { return static_cast<int>(states.rows()); }
};

// ---------------------------------------------------------------------------
// Split construction
// ---------------------------------------------------------------------------

// Episode-level success test used to pick demonstrations out of raw data.
// TopQuantile(q): episodic return among the top q fraction; ties are filled
// by ascending episode index so the demo set has size exactly ceil(q*n).
// StepFraction(f): at least fraction f of the steps issued reward 1.
struct SuccessRule {
  enum class Kind { TopQuantile, StepFraction } kind;
  double value;

  static SuccessRule top_quantile(double q) {
    if (q <= 0.0 || q > 1.0) throw std::invalid_argument("top_quantile: q must be in (0,1]");
    return {Kind::TopQuantile, q};
  }
  static SuccessRule step_fraction(double f) {
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("step_fraction: threshold must be in [0,1]");
    return {Kind::StepFraction, f};
  }
};

inline double episode_return(const Episode& e) {
  if (!e.has_gt()) throw MissingGroundTruth();
  return e.gt_rewards.sum();
}

// Indices of episodes satisfying the rule, ascending.
inline std::vector<int> successful_episodes(const Dataset& raw, const SuccessRule& rule) {
  const int n = static_cast<int>(raw.episodes.size());
  std::vector<int> out;
  if (rule.kind == SuccessRule::Kind::StepFraction) {
    for (int i = 0; i < n; ++i) {
      const Episode& e = raw.episodes[i];
      if (!e.has_gt()) throw MissingGroundTruth();
      long ones = 0;
      for (long t = 0; t < e.gt_rewards.size(); ++t)
        if (e.gt_rewards[t] == 1.0) ++ones;
      if (e.length() > 0 && static_cast<double>(ones) >= rule.value * e.length()) out.push_back(i);
    }
    return out;
  }
  // TopQuantile: m = ceil(q*n) episodes; all strictly above the cutoff return
  // enter, then cutoff-tied episodes fill remaining slots by ascending index.
  std::vector<double> returns(n);
  for (int i = 0; i < n; ++i) returns[i] = episode_return(raw.episodes[i]);
  const int m = std::min<long>(n, static_cast<long>(std::ceil(rule.value * n - 1e-9)));
  if (m <= 0) return out;
  std::vector<double> sorted = returns;
  std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end(), std::greater<double>());
  const double cutoff = sorted[m - 1];
  int above = 0;
  for (int i = 0; i < n; ++i)
    if (returns[i] > cutoff) ++above;
  int fill = m - above;
  for (int i = 0; i < n; ++i) {
    if (returns[i] > cutoff) {
      out.push_back(i);
    } else if (returns[i] == cutoff && fill > 0) {
      out.push_back(i);
      --fill;
    }
  }
  return out;
}

namespace detail {

inline Episode strip_gt(const Episode& e) {
  Episode out;
  out.id = e.id;
  out.states = e.states;
  out.actions = e.actions;
  return out;
}

// Uniform partition of {0..n-1} into sizes ceil(n/2), floor(n/2).
inline std::pair<std::vector<int>, std::vector<int>> halve_indices(int n, RngStream& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.integer(static_cast<std::uint64_t>(i) + 1)]);
  const int half = (n + 1) / 2;
  std::vector<int> a(idx.begin(), idx.begin() + half);
  std::vector<int> b(idx.begin() + half, idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {std::move(a), std::move(b)};
}

inline SplitDataset split_from_demo_set(const Dataset& raw, const std::vector<char>& is_demo, RngStream& rng) {
  SplitDataset split;
  split.demos.obs_dim = split.unlabeled.obs_dim = raw.obs_dim;
  split.demos.act_dim = split.unlabeled.act_dim = raw.act_dim;
  split.demos.meta = raw.meta;
  split.unlabeled.meta = raw.meta;
  for (std::size_t i = 0; i < raw.episodes.size(); ++i)
    (is_demo[i] ? split.demos : split.unlabeled).episodes.push_back(strip_gt(raw.episodes[i]));
  if (split.demos.empty()) throw EmptyDemoSet();
  std::tie(split.unlabeled_half_a, split.unlabeled_half_b) =
      halve_indices(static_cast<int>(split.unlabeled.episodes.size()), rng);
  return split;
}

}  // namespace detail

// Demonstration extraction per the logged-data recipe: each successful episode
// enters D_E independently with probability inclusion_prob, everything else is
// unlabeled, ground-truth rewards are stripped from both outputs, and the
// unlabeled halving comes from the same seed stream.
inline SplitDataset build_split(const Dataset& raw, const SuccessRule& rule, double inclusion_prob,
                                std::uint64_t seed) {
  if (inclusion_prob <= 0.0 || inclusion_prob > 1.0)
    throw std::invalid_argument("build_split: inclusion_prob must be in (0,1]");
  if (!raw.has_gt_rewards()) throw MissingGroundTruth();
  const std::vector<int> successes = successful_episodes(raw, rule);
  RngStream rng(seed, 1);
  std::vector<char> is_demo(raw.episodes.size(), 0);
  for (int idx : successes)
    if (rng.uniform() < inclusion_prob) is_demo[idx] = 1;
  return detail::split_from_demo_set(raw, is_demo, rng);
}

// Split with a pinned demo-id set. Used by ablations that must keep D_E fixed
// while the unlabeled pool changes underneath it.
inline SplitDataset build_split_pinned(const Dataset& raw, const std::vector<std::uint64_t>& demo_ids,
                                       std::uint64_t seed) {
  if (!raw.has_gt_rewards()) throw MissingGroundTruth();
  RngStream rng(seed, 1);
  std::vector<char> is_demo(raw.episodes.size(), 0);
  for (std::size_t i = 0; i < raw.episodes.size(); ++i)
    is_demo[i] = std::find(demo_ids.begin(), demo_ids.end(), raw.episodes[i].id) != demo_ids.end();
  return detail::split_from_demo_set(raw, is_demo, rng);
}

inline std::pair<std::vector<int>, std::vector<int>> halve_unlabeled(const Dataset& d, std::uint64_t seed) {
  if (d.empty()) throw EmptyDataset();
  RngStream rng(seed, 2);
  return detail::halve_indices(static_cast<int>(d.episodes.size()), rng);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

// Uniform over the multiset of all per-step states (episodes weighted by
// length), with replacement.
inline Matrix sample_states(const Dataset& d, int n, RngStream& rng) {
  if (d.empty()) throw EmptyDataset();
  if (n < 1) throw std::invalid_argument("sample_states: n must be >= 1");
  std::vector<long> prefix(d.episodes.size() + 1, 0);
  for (std::size_t i = 0; i < d.episodes.size(); ++i)
    prefix[i + 1] = prefix[i] + d.episodes[i].length() + 1;
  const long total = prefix.back();
  Matrix out(n, d.obs_dim);
  for (int i = 0; i < n; ++i) {
    long flat = static_cast<long>(rng.integer(static_cast<std::uint64_t>(total)));
    auto it = std::upper_bound(prefix.begin(), prefix.end(), flat);
    int ep = static_cast<int>(it - prefix.begin()) - 1;
    out.row(i) = d.episodes[ep].states.row(flat - prefix[ep]);
  }
  return out;
}

// First min(k, length) observations of each episode, concatenated.
inline Matrix early_states(const Dataset& d, int k = 10) {
  if (k < 1) throw std::invalid_argument("early_states: k must be >= 1");
  long rows = 0;
  for (const auto& e : d.episodes) rows += std::min<long>(k, e.states.rows());
  Matrix out(rows, d.obs_dim);
  long r = 0;
  for (const auto& e : d.episodes) {
    long take = std::min<long>(k, e.states.rows());
    out.middleRows(r, take) = e.states.topRows(take);
    r += take;
  }
  return out;
}

// Same, over a subset of episodes (by index into d.episodes).
inline Matrix early_states(const Dataset& d, std::span<const int> episode_indices, int k = 10) {
  if (k < 1) throw std::invalid_argument("early_states: k must be >= 1");
  long rows = 0;
  for (int i : episode_indices) rows += std::min<long>(k, d.episodes[i].states.rows());
  Matrix out(rows, d.obs_dim);
  long r = 0;
  for (int i : episode_indices) {
    long take = std::min<long>(k, d.episodes[i].states.rows());
    out.middleRows(r, take) = d.episodes[i].states.topRows(take);
    r += take;
  }
  return out;
}

enum class Source : std::uint8_t { Expert, HalfA, HalfB };

inline const char* source_name(Source s) {
  switch (s) {
    case Source::Expert: return "EXPERT";
    case Source::HalfA: return "HALF_A";
    default: return "HALF_B";
  }
}

// What a sampled row is consumed for; lets tests assert the half-split and
// demo-only disciplines through an observer.
enum class SamplePurpose : std::uint8_t { Generic, RewardExpert, RewardUnlabeled, RewardConstraint, AgentBatch };

// Uniform sampler over a SplitDataset with cached per-source indexes.
// Holds a reference to the split; the split must outlive the sampler.
// Thread-safe for concurrent sampling as long as each caller brings its own
// RngStream and no observer is installed.
class SplitSampler {
 public:
  using Observer = std::function<void(SamplePurpose, Source, std::uint64_t episode_id, int t)>;

  explicit SplitSampler(const SplitDataset& split) : split_(&split) {
    index_source(split.demos, all_indices(split.demos), expert_);
    index_source(split.unlabeled, split.unlabeled_half_a, half_a_);
    index_source(split.unlabeled, split.unlabeled_half_b, half_b_);
  }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  long transition_count(Source s) const { return entry(s).transitions; }
  long state_count(Source s) const { return entry(s).states; }

  // Uniform over the pooled transitions of the requested sources.
  TransitionBatch transitions(std::span<const Source> sources, int n, RngStream& rng,
                              SamplePurpose purpose = SamplePurpose::Generic) const {
    if (n < 1) throw std::invalid_argument("transitions: n must be >= 1");
    long total = 0;
    for (Source s : sources) {
      if (entry(s).transitions == 0) throw EmptySource(source_name(s));
      total += entry(s).transitions;
    }
    if (sources.empty()) throw EmptySource("(none requested)");
    const Dataset& demos = split_->demos;
    TransitionBatch batch;
    batch.states.resize(n, demos.obs_dim);
    batch.actions.resize(n, demos.act_dim);
    batch.next_states.resize(n, demos.obs_dim);
    batch.origin.resize(n);
    batch.episode_ids.resize(n);
    batch.t_index.resize(n);
    for (int i = 0; i < n; ++i) {
      long flat = static_cast<long>(rng.integer(static_cast<std::uint64_t>(total)));
      Source src = Source::Expert;
      for (Source s : sources) {
        if (flat < entry(s).transitions) {
          src = s;
          break;
        }
        flat -= entry(s).transitions;
      }
      const PerSource& ps = entry(src);
      auto it = std::upper_bound(ps.transition_prefix.begin(), ps.transition_prefix.end(), flat);
      int slot = static_cast<int>(it - ps.transition_prefix.begin()) - 1;
      const Episode& e = *ps.episodes[slot];
      int t = static_cast<int>(flat - ps.transition_prefix[slot]);
      batch.states.row(i) = e.states.row(t);
      batch.actions.row(i) = e.actions.row(t);
      batch.next_states.row(i) = e.states.row(t + 1);
      batch.origin[i] = src == Source::Expert ? Origin::Expert : Origin::Unlabeled;
      batch.episode_ids[i] = e.id;
      batch.t_index[i] = t;
      if (observer_) observer_(purpose, src, e.id, t);
    }
    return batch;
  }

  TransitionBatch transitions(std::initializer_list<Source> sources, int n, RngStream& rng,
                              SamplePurpose purpose = SamplePurpose::Generic) const {
    return transitions(std::span<const Source>(sources.begin(), sources.size()), n, rng, purpose);
  }

  // Uniform over the pooled states (T+1 per episode) of the requested sources.
  Matrix states(std::span<const Source> sources, int n, RngStream& rng,
                SamplePurpose purpose = SamplePurpose::Generic) const {
    if (n < 1) throw std::invalid_argument("states: n must be >= 1");
    long total = 0;
    for (Source s : sources) {
      if (entry(s).states == 0) throw EmptySource(source_name(s));
      total += entry(s).states;
    }
    if (sources.empty()) throw EmptySource("(none requested)");
    Matrix out(n, split_->demos.obs_dim);
    for (int i = 0; i < n; ++i) {
      long flat = static_cast<long>(rng.integer(static_cast<std::uint64_t>(total)));
      Source src = Source::Expert;
      for (Source s : sources) {
        if (flat < entry(s).states) {
          src = s;
          break;
        }
        flat -= entry(s).states;
      }
      const PerSource& ps = entry(src);
      auto it = std::upper_bound(ps.state_prefix.begin(), ps.state_prefix.end(), flat);
      int slot = static_cast<int>(it - ps.state_prefix.begin()) - 1;
      const Episode& e = *ps.episodes[slot];
      int t = static_cast<int>(flat - ps.state_prefix[slot]);
      out.row(i) = e.states.row(t);
      if (observer_) observer_(purpose, src, e.id, t);
    }
    return out;
  }

  Matrix states(std::initializer_list<Source> sources, int n, RngStream& rng,
                SamplePurpose purpose = SamplePurpose::Generic) const {
    return states(std::span<const Source>(sources.begin(), sources.size()), n, rng, purpose);
  }

  const SplitDataset& split() const { return *split_; }

 private:
  struct PerSource {
    std::vector<const Episode*> episodes;
    std::vector<long> transition_prefix;  // size episodes+1
    std::vector<long> state_prefix;
    long transitions = 0;
    long states = 0;
  };

  static std::vector<int> all_indices(const Dataset& d) {
    std::vector<int> idx(d.episodes.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }

  static void index_source(const Dataset& d, const std::vector<int>& episode_indices, PerSource& ps) {
    ps.transition_prefix.assign(1, 0);
    ps.state_prefix.assign(1, 0);
    for (int i : episode_indices) {
      const Episode& e = d.episodes[i];
      ps.episodes.push_back(&e);
      ps.transition_prefix.push_back(ps.transition_prefix.back() + e.length());
      ps.state_prefix.push_back(ps.state_prefix.back() + e.length() + 1);
    }
    ps.transitions = ps.transition_prefix.back();
    ps.states = ps.state_prefix.back();
  }

  const PerSource& entry(Source s) const {
    switch (s) {
      case Source::Expert: return expert_;
      case Source::HalfA: return half_a_;
      default: return half_b_;
    }
  }

  const SplitDataset* split_;
  PerSource expert_, half_a_, half_b_;
  Observer observer_;
};

// Free-function form used by callers that sample a whole Dataset's transitions
// without a split (behavior cloning on one set, tests).
inline TransitionBatch sample_transitions(const Dataset& d, int n, RngStream& rng,
                                          Origin origin = Origin::Unlabeled) {
  if (d.empty() || d.total_transitions() == 0) throw EmptyDataset();
  if (n < 1) throw std::invalid_argument("sample_transitions: n must be >= 1");
  std::vector<long> prefix(d.episodes.size() + 1, 0);
  for (std::size_t i = 0; i < d.episodes.size(); ++i)
    prefix[i + 1] = prefix[i] + d.episodes[i].length();
  const long total = prefix.back();
  TransitionBatch batch;
  batch.states.resize(n, d.obs_dim);
  batch.actions.resize(n, d.act_dim);
  batch.next_states.resize(n, d.obs_dim);
  batch.origin.assign(n, origin);
  batch.episode_ids.resize(n);
  batch.t_index.resize(n);
  for (int i = 0; i < n; ++i) {
    long flat = static_cast<long>(rng.integer(static_cast<std::uint64_t>(total)));
    auto it = std::upper_bound(prefix.begin(), prefix.end(), flat);
    int ep = static_cast<int>(it - prefix.begin()) - 1;
    const Episode& e = d.episodes[ep];
    int t = static_cast<int>(flat - prefix[ep]);
    batch.states.row(i) = e.states.row(t);
    batch.actions.row(i) = e.actions.row(t);
    batch.next_states.row(i) = e.states.row(t + 1);
    batch.episode_ids[i] = e.id;
    batch.t_index[i] = t;
  }
  return batch;
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------
// Little-endian container:
//   magic "ORILDS01" | obs_dim u32 | act_dim u32 | episode_count u32 |
//   flags u32 (bit0: gt_rewards present)
//   per episode: id u64 | T u32 | states (T+1)*obs_dim f32 | actions T*act_dim f32
//                | rewards T f32 when flagged
//   meta: pair_count u32, then per pair key/value as u32 length + UTF-8 bytes.

namespace detail {

inline constexpr char kDatasetMagic[8] = {'O', 'R', 'I', 'L', 'D', 'S', '0', '1'};

struct ByteWriter {
  std::string buf;
  void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  void raw(void* p, std::size_t n) {
    if (pos + n > buf.size()) throw FormatError("unexpected end of file", pos);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  float f32() {
    float v;
    raw(&v, 4);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    if (pos + n > buf.size()) throw FormatError("truncated string", pos);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  validate_dataset(d);
  const bool gt = d.has_gt_rewards();
  detail::ByteWriter w;
  w.raw(detail::kDatasetMagic, 8);
  w.u32(static_cast<std::uint32_t>(d.obs_dim));
  w.u32(static_cast<std::uint32_t>(d.act_dim));
  w.u32(static_cast<std::uint32_t>(d.episodes.size()));
  w.u32(gt ? 1u : 0u);
  for (const Episode& e : d.episodes) {
    w.u64(e.id);
    w.u32(static_cast<std::uint32_t>(e.length()));
    for (long r = 0; r < e.states.rows(); ++r)
      for (int c = 0; c < d.obs_dim; ++c) w.f32(static_cast<float>(e.states(r, c)));
    for (long r = 0; r < e.actions.rows(); ++r)
      for (int c = 0; c < d.act_dim; ++c) w.f32(static_cast<float>(e.actions(r, c)));
    if (gt)
      for (long t = 0; t < e.gt_rewards.size(); ++t) w.f32(static_cast<float>(e.gt_rewards[t]));
  }
  w.u32(static_cast<std::uint32_t>(d.meta.size()));
  for (const auto& [k, v] : d.meta) {
    w.str(k);
    w.str(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot open for writing: " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw SchemaError("write failed: " + path.string());
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open for reading: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r{buf};
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, detail::kDatasetMagic, 8) != 0) throw FormatError("bad magic string", 0);
  Dataset d;
  d.obs_dim = static_cast<int>(r.u32());
  d.act_dim = static_cast<int>(r.u32());
  if (d.obs_dim <= 0 || d.act_dim <= 0) throw SchemaError("non-positive dimensions in header");
  const std::uint32_t count = r.u32();
  const bool gt = (r.u32() & 1u) != 0;
  d.episodes.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Episode& e = d.episodes[i];
    e.id = r.u64();
    const std::uint32_t T = r.u32();
    e.states.resize(T + 1, d.obs_dim);
    for (std::uint32_t row = 0; row <= T; ++row)
      for (int c = 0; c < d.obs_dim; ++c) e.states(row, c) = static_cast<double>(r.f32());
    e.actions.resize(T, d.act_dim);
    for (std::uint32_t row = 0; row < T; ++row)
      for (int c = 0; c < d.act_dim; ++c) e.actions(row, c) = static_cast<double>(r.f32());
    if (gt) {
      e.gt_rewards.resize(T);
      for (std::uint32_t t = 0; t < T; ++t) e.gt_rewards[t] = static_cast<double>(r.f32());
    }
  }
  const std::uint32_t pairs = r.u32();
  for (std::uint32_t i = 0; i < pairs; ++i) {
    std::string k = r.str();
    d.meta[k] = r.str();
  }
  if (r.pos != buf.size()) throw FormatError("trailing bytes after meta block", r.pos);
  return d;
}

}  // namespace oril::trajdata
