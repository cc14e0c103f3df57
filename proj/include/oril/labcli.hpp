#pragma once

#include "oril/common.hpp"
#include "oril/crragent.hpp"
#include "oril/diffcore.hpp"
#include "oril/rewardlearn.hpp"
#include "oril/rng.hpp"
#include "oril/trajdata.hpp"
#include "oril/worldsim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace oril::labcli {

namespace fs = std::filesystem;
using crragent::GtRewardTable;
using crragent::StepMetrics;
using crragent::TrainMethod;
using trajdata::Dataset;
using trajdata::SplitDataset;

struct FileError : std::runtime_error {
  explicit FileError(const std::string& what) : std::runtime_error(what) {}
};
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Number formatting: exact round-trip in configs and CSVs
// ---------------------------------------------------------------------------

inline std::string fmt_f64(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class Int>
inline std::string fmt_int(Int v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline double parse_f64(const std::string& s, const std::string& key) {
  double v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("key '" + key + "': cannot parse real value '" + s + "'");
  return v;
}

template <class Int>
inline Int parse_int(const std::string& s, const std::string& key) {
  Int v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("key '" + key + "': cannot parse integer '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

// Flat key-value run description. Every knob of every module lives here so a
// run is reproducible from (config, seed) alone.
struct RunConfig {
  // experiment
  std::string env = "point_reach";
  std::string method = "oril_p";
  std::string dataset;  // path to a trajectory file, used by train/ablate
  long total_steps = 50000;
  long eval_every = 2000;
  double eval_window_fraction = 0.5;
  int eval_episodes = 20;
  bool eval_sample = true;
  std::uint64_t eval_seed = 9000;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  long metrics_every = 1;
  // agent
  double gamma = 0.99;
  int target_sync_period = 100;
  int value_samples = 4;
  int batch_per_source = 256;
  int hidden_width = 64;
  int hidden_layers = 2;
  int gmm_components = 5;
  int n_atoms = 51;
  double v_min = 0.0;
  double v_max = 100.0;
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // reward model
  double eta = 0.5;
  bool pu_clamp = false;
  double augment_scale = 0.01;
  int constraint_k = 10;
  // dataset split
  std::string success_rule = "step_fraction";
  double success_value = 0.5;
  double inclusion_prob = 0.0625;
  std::uint64_t split_seed = 7;
  // generation
  int mix_scripted = 0;
  int mix_noisy = 125;
  int mix_random = 375;
  double noisy_sigma = 0.3;
  std::uint64_t gen_seed = 42;
};

namespace detail {

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ",";
    s += fmt_int(seeds[i]);
  }
  return s;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s, const std::string& key) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(parse_int<std::uint64_t>(s.substr(pos, comma - pos), key));
    pos = comma + 1;
    if (comma == s.size()) break;
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty seed list");
  return out;
}

}  // namespace detail

inline void validate_config(const RunConfig& c) {
  if (c.eval_every < 1 || c.total_steps < c.eval_every)
    throw ConfigError("need total_steps >= eval_every >= 1");
  if (c.eval_window_fraction < 0.0 || c.eval_window_fraction > 1.0)
    throw ConfigError("eval_window_fraction must lie in [0,1]");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (c.metrics_every < 1) throw ConfigError("metrics_every must be >= 1");
  if (c.batch_per_source < 1) throw ConfigError("batch_per_source must be >= 1");
  if (!(c.inclusion_prob > 0.0 && c.inclusion_prob <= 1.0))
    throw ConfigError("inclusion_prob must lie in (0,1]");
  if (c.success_rule != "step_fraction" && c.success_rule != "top_quantile")
    throw ConfigError("unknown success_rule: " + c.success_rule);
  crragent::parse_method(c.method);
  worldsim::Env::by_name(c.env);
}

// Serialized form: one `key = value` line per field, fixed order, exact
// numeric round-trip.
inline std::string serialize_config(const RunConfig& c) {
  std::string s;
  auto put = [&s](const char* k, const std::string& v) {
    s += k;
    s += " = ";
    s += v;
    s += "\n";
  };
  put("env", c.env);
  put("method", c.method);
  put("dataset", c.dataset);
  put("total_steps", fmt_int(c.total_steps));
  put("eval_every", fmt_int(c.eval_every));
  put("eval_window_fraction", fmt_f64(c.eval_window_fraction));
  put("eval_episodes", fmt_int(c.eval_episodes));
  put("eval_sample", c.eval_sample ? "true" : "false");
  put("eval_seed", fmt_int(c.eval_seed));
  put("seeds", detail::join_seeds(c.seeds));
  put("metrics_every", fmt_int(c.metrics_every));
  put("gamma", fmt_f64(c.gamma));
  put("target_sync_period", fmt_int(c.target_sync_period));
  put("value_samples", fmt_int(c.value_samples));
  put("batch_per_source", fmt_int(c.batch_per_source));
  put("hidden_width", fmt_int(c.hidden_width));
  put("hidden_layers", fmt_int(c.hidden_layers));
  put("gmm_components", fmt_int(c.gmm_components));
  put("n_atoms", fmt_int(c.n_atoms));
  put("v_min", fmt_f64(c.v_min));
  put("v_max", fmt_f64(c.v_max));
  put("lr", fmt_f64(c.lr));
  put("adam_beta1", fmt_f64(c.adam_beta1));
  put("adam_beta2", fmt_f64(c.adam_beta2));
  put("adam_eps", fmt_f64(c.adam_eps));
  put("eta", fmt_f64(c.eta));
  put("pu_clamp", c.pu_clamp ? "true" : "false");
  put("augment_scale", fmt_f64(c.augment_scale));
  put("constraint_k", fmt_int(c.constraint_k));
  put("success_rule", c.success_rule);
  put("success_value", fmt_f64(c.success_value));
  put("inclusion_prob", fmt_f64(c.inclusion_prob));
  put("split_seed", fmt_int(c.split_seed));
  put("mix_scripted", fmt_int(c.mix_scripted));
  put("mix_noisy", fmt_int(c.mix_noisy));
  put("mix_random", fmt_int(c.mix_random));
  put("noisy_sigma", fmt_f64(c.noisy_sigma));
  put("gen_seed", fmt_int(c.gen_seed));
  return s;
}

// Parses `key = value` lines; '#' starts a comment, blank lines are skipped,
// unknown or repeated keys are errors.
inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (seen[key]) throw ConfigError("repeated key: " + key);
    seen[key] = true;
    if (key == "env") c.env = val;
    else if (key == "method") c.method = val;
    else if (key == "dataset") c.dataset = val;
    else if (key == "total_steps") c.total_steps = parse_int<long>(val, key);
    else if (key == "eval_every") c.eval_every = parse_int<long>(val, key);
    else if (key == "eval_window_fraction") c.eval_window_fraction = parse_f64(val, key);
    else if (key == "eval_episodes") c.eval_episodes = parse_int<int>(val, key);
    else if (key == "eval_sample") c.eval_sample = parse_bool(val, key);
    else if (key == "eval_seed") c.eval_seed = parse_int<std::uint64_t>(val, key);
    else if (key == "seeds") c.seeds = detail::parse_seeds(val, key);
    else if (key == "metrics_every") c.metrics_every = parse_int<long>(val, key);
    else if (key == "gamma") c.gamma = parse_f64(val, key);
    else if (key == "target_sync_period") c.target_sync_period = parse_int<int>(val, key);
    else if (key == "value_samples") c.value_samples = parse_int<int>(val, key);
    else if (key == "batch_per_source") c.batch_per_source = parse_int<int>(val, key);
    else if (key == "hidden_width") c.hidden_width = parse_int<int>(val, key);
    else if (key == "hidden_layers") c.hidden_layers = parse_int<int>(val, key);
    else if (key == "gmm_components") c.gmm_components = parse_int<int>(val, key);
    else if (key == "n_atoms") c.n_atoms = parse_int<int>(val, key);
    else if (key == "v_min") c.v_min = parse_f64(val, key);
    else if (key == "v_max") c.v_max = parse_f64(val, key);
    else if (key == "lr") c.lr = parse_f64(val, key);
    else if (key == "adam_beta1") c.adam_beta1 = parse_f64(val, key);
    else if (key == "adam_beta2") c.adam_beta2 = parse_f64(val, key);
    else if (key == "adam_eps") c.adam_eps = parse_f64(val, key);
    else if (key == "eta") c.eta = parse_f64(val, key);
    else if (key == "pu_clamp") c.pu_clamp = parse_bool(val, key);
    else if (key == "augment_scale") c.augment_scale = parse_f64(val, key);
    else if (key == "constraint_k") c.constraint_k = parse_int<int>(val, key);
    else if (key == "success_rule") c.success_rule = val;
    else if (key == "success_value") c.success_value = parse_f64(val, key);
    else if (key == "inclusion_prob") c.inclusion_prob = parse_f64(val, key);
    else if (key == "split_seed") c.split_seed = parse_int<std::uint64_t>(val, key);
    else if (key == "mix_scripted") c.mix_scripted = parse_int<int>(val, key);
    else if (key == "mix_noisy") c.mix_noisy = parse_int<int>(val, key);
    else if (key == "mix_random") c.mix_random = parse_int<int>(val, key);
    else if (key == "noisy_sigma") c.noisy_sigma = parse_f64(val, key);
    else if (key == "gen_seed") c.gen_seed = parse_int<std::uint64_t>(val, key);
    else throw ConfigError("unknown config key: " + key);
  }
  validate_config(c);
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

inline crragent::AgentConfig agent_config(const RunConfig& c) {
  crragent::AgentConfig a;
  a.gamma = c.gamma;
  a.target_sync_period = c.target_sync_period;
  a.value_samples = c.value_samples;
  a.batch_per_source = c.batch_per_source;
  a.hidden_width = c.hidden_width;
  a.hidden_layers = c.hidden_layers;
  a.gmm_components = c.gmm_components;
  a.n_atoms = c.n_atoms;
  a.v_min = c.v_min;
  a.v_max = c.v_max;
  a.adam = {c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps};
  return a;
}

inline rewardlearn::RewardConfig reward_config(const RunConfig& c) {
  rewardlearn::RewardConfig r;
  r.hidden_width = c.hidden_width;
  r.hidden_layers = c.hidden_layers;
  r.eta = c.eta;
  r.pu_clamp = c.pu_clamp;
  r.augment_scale = c.augment_scale;
  r.constraint_k = c.constraint_k;
  r.adam = {c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps};
  return r;
}

inline trajdata::SuccessRule success_rule(const RunConfig& c) {
  return c.success_rule == "top_quantile" ? trajdata::SuccessRule::top_quantile(c.success_value)
                                          : trajdata::SuccessRule::step_fraction(c.success_value);
}

// ---------------------------------------------------------------------------
// Evaluation protocol
// ---------------------------------------------------------------------------

struct EvalPoint {
  long step;
  double value;
};

// Mean evaluation return over the trailing window: points whose step is at
// least window_fraction * total_steps.
inline double eval_protocol(const std::vector<EvalPoint>& points, double window_fraction, long total_steps) {
  const double threshold = window_fraction * static_cast<double>(total_steps);
  double sum = 0.0;
  long n = 0;
  for (const EvalPoint& p : points) {
    if (static_cast<double>(p.step) >= threshold) {
      sum += p.value;
      ++n;
    }
  }
  if (n == 0) throw ProtocolError("no evaluation points fall inside the scoring window");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Training cells
// ---------------------------------------------------------------------------

struct CellResult {
  std::string method;
  std::string env;
  std::uint64_t seed = 0;
  double score = 0.0;
  std::vector<StepMetrics> metrics;
  std::vector<EvalPoint> evals;
};

inline void write_metrics_csv(const fs::path& path, const CellResult& cell) {
  std::string out = "step,method,reward_loss,critic_loss,policy_loss,indicator_rate,eval_return\n";
  std::map<long, double> eval_at;
  for (const EvalPoint& p : cell.evals) eval_at[p.step] = p.value;
  for (const StepMetrics& m : cell.metrics) {
    out += fmt_int(m.step);
    out += ",";
    out += cell.method;
    out += ",";
    out += fmt_f64(m.reward_loss);
    out += ",";
    out += fmt_f64(m.critic_loss);
    out += ",";
    out += fmt_f64(m.policy_loss);
    out += ",";
    out += fmt_f64(m.indicator_rate);
    out += ",";
    if (auto it = eval_at.find(m.step); it != eval_at.end()) out += fmt_f64(it->second);
    out += "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FileError("cannot write " + path.string());
  f << out;
}

// Runs one (method, seed) cell to completion. When out_dir is nonempty the
// cell writes metrics.csv and checkpoint.bin there.
inline CellResult run_training_cell(const RunConfig& cfg, const SplitDataset& split, const GtRewardTable* gt,
                                    TrainMethod method, std::uint64_t seed, const fs::path& out_dir = {}) {
  const worldsim::Env env = worldsim::Env::by_name(cfg.env);
  crragent::Trainer trainer(method, split, agent_config(cfg), reward_config(cfg), seed, gt);
  CellResult cell;
  cell.method = crragent::method_name(method);
  cell.env = cfg.env;
  cell.seed = seed;
  cell.metrics.reserve(cfg.total_steps / cfg.metrics_every + 1);
  for (long step = 1; step <= cfg.total_steps; ++step) {
    StepMetrics m = trainer.train_step();
    if (step % cfg.metrics_every == 0 || step == cfg.total_steps) cell.metrics.push_back(m);
    if (step % cfg.eval_every == 0) {
      const double ret =
          crragent::evaluate(trainer.bundle().policy, env, cfg.eval_episodes, cfg.eval_seed, cfg.eval_sample);
      cell.evals.push_back({step, ret});
    }
  }
  cell.score = eval_protocol(cell.evals, cfg.eval_window_fraction, cfg.total_steps);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_metrics_csv(out_dir / "metrics.csv", cell);
    std::vector<std::pair<std::string, const diffcore::Approximator*>> entries = {
        {"policy", &trainer.bundle().policy}, {"critic", &trainer.bundle().critic}};
    if (rewardlearn::RewardModel* rm = trainer.reward_model())
      entries.emplace_back(std::string("reward:") + rewardlearn::reward_mode_name(rm->mode) +
                               ":eta=" + fmt_f64(rm->cfg.eta),
                           &rm->net);
    diffcore::write_checkpoint(out_dir / "checkpoint.bin", entries);
  }
  return cell;
}

// ---------------------------------------------------------------------------
// Summary rows
// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string method;
  std::string env;
  std::uint64_t seed = 0;
  double score = 0.0;
  std::string axis;        // empty for plain training runs
  double axis_value = 0.0;

  bool has_axis() const { return !axis.empty(); }
};

inline void canonical_sort(std::vector<SummaryRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.env != b.env) return a.env < b.env;
    if (a.axis != b.axis) return a.axis < b.axis;
    if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
    if (a.method != b.method) return a.method < b.method;
    return a.seed < b.seed;
  });
}

inline void write_summary_csv(const fs::path& path, std::vector<SummaryRow> rows) {
  canonical_sort(rows);
  const bool axes = std::any_of(rows.begin(), rows.end(), [](const SummaryRow& r) { return r.has_axis(); });
  std::string out = axes ? "method,env,seed,score,axis,value\n" : "method,env,seed,score\n";
  for (const SummaryRow& r : rows) {
    out += r.method;
    out += ",";
    out += r.env;
    out += ",";
    out += fmt_int(r.seed);
    out += ",";
    out += fmt_f64(r.score);
    if (axes) {
      out += ",";
      out += r.axis;
      out += ",";
      out += fmt_f64(r.axis_value);
    }
    out += "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FileError("cannot write " + path.string());
  f << out;
}

inline std::vector<SummaryRow> read_summary_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FileError("empty summary: " + path.string());
  const bool axes = line == "method,env,seed,score,axis,value";
  if (!axes && line != "method,env,seed,score") throw FileError("unrecognized summary header: " + line);
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      parts.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (parts.size() != (axes ? 6u : 4u)) throw FileError("malformed summary row: " + line);
    SummaryRow r;
    r.method = parts[0];
    r.env = parts[1];
    r.seed = parse_int<std::uint64_t>(parts[2], "seed");
    r.score = parse_f64(parts[3], "score");
    if (axes) {
      r.axis = parts[4];
      r.axis_value = parse_f64(parts[5], "value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Parallel cell execution
// ---------------------------------------------------------------------------

inline int thread_budget() {
  if (const char* s = std::getenv("ORIL_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(0..n_jobs-1), at most `budget` at a time. Jobs must be independent;
// each writes only its own slot.
inline void run_jobs(int n_jobs, int budget, const std::function<void(int)>& fn) {
  if (n_jobs <= 0) return;
  if (budget <= 1 || n_jobs == 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(budget, n_jobs);
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n_jobs; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

struct AblationSpec {
  enum class Kind : std::uint8_t { UnlabeledFraction, LowQualityInjection, DemoFraction };
  Kind kind = Kind::UnlabeledFraction;
  std::vector<double> values;  // fractions, or {1, multiplier} for injection

  static AblationSpec unlabeled_fraction(std::vector<double> fractions) {
    check_fractions(fractions);
    return {Kind::UnlabeledFraction, std::move(fractions)};
  }
  static AblationSpec demo_fraction(std::vector<double> fractions) {
    check_fractions(fractions);
    return {Kind::DemoFraction, std::move(fractions)};
  }
  static AblationSpec low_quality_injection(double multiplier) {
    if (multiplier < 1.0) throw ConfigError("injection multiplier must be >= 1");
    return {Kind::LowQualityInjection, {1.0, multiplier}};
  }

  const char* axis_name() const {
    switch (kind) {
      case Kind::UnlabeledFraction: return "unlabeled_fraction";
      case Kind::LowQualityInjection: return "low_quality_injection";
      default: return "demo_fraction";
    }
  }

 private:
  static void check_fractions(const std::vector<double>& fractions) {
    if (fractions.empty()) throw ConfigError("ablation fraction list is empty");
    for (double f : fractions)
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("ablation fractions must lie in (0,1]");
  }
};

// Keeps the demos, restricts the unlabeled pool to a seeded-permutation
// prefix; prefixes are nested across fractions so a larger fraction is a
// strict superset of a smaller one.
inline SplitDataset restrict_unlabeled(const SplitDataset& base, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("unlabeled fraction must lie in (0,1]");
  const int n = static_cast<int>(base.unlabeled.episodes.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed, 3);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(rng.integer(static_cast<std::uint64_t>(i) + 1))]);
  const int take = std::min<long>(n, static_cast<long>(std::ceil(fraction * n - 1e-9)));
  std::vector<int> keep(perm.begin(), perm.begin() + std::max(1, take));
  std::sort(keep.begin(), keep.end());
  SplitDataset out;
  out.demos = base.demos;
  out.unlabeled.obs_dim = base.unlabeled.obs_dim;
  out.unlabeled.act_dim = base.unlabeled.act_dim;
  out.unlabeled.meta = base.unlabeled.meta;
  for (int i : keep) out.unlabeled.episodes.push_back(base.unlabeled.episodes[i]);
  std::tie(out.unlabeled_half_a, out.unlabeled_half_b) = trajdata::halve_unlabeled(out.unlabeled, seed);
  return out;
}

// Appends freshly generated low-quality episodes to a copy of the raw data;
// ids continue after the existing maximum so the original episodes keep
// their identity.
inline Dataset inject_low_quality(const Dataset& raw, const worldsim::Env& env, long n_new,
                                  std::uint64_t seed) {
  Dataset amended = raw;
  std::uint64_t next_id = 0;
  for (const auto& e : raw.episodes) next_id = std::max(next_id, e.id + 1);
  RngStream master(seed, 17);
  const worldsim::BehaviorPolicy policy = worldsim::BehaviorPolicy::random();
  for (long i = 0; i < n_new; ++i)
    amended.episodes.push_back(worldsim::rollout_episode(env, policy, master.next_u64(), next_id++));
  amended.meta["injected_random_episodes"] = fmt_int(n_new);
  return amended;
}

// Methods x seeds x axis values; every cell trains from scratch on its own
// variant of the split. Cells run in parallel up to the thread budget.
inline std::vector<SummaryRow> run_ablation(const RunConfig& cfg, const Dataset& raw, const AblationSpec& spec,
                                            const std::vector<TrainMethod>& methods,
                                            const fs::path& out_root = {}) {
  const worldsim::Env env = worldsim::Env::by_name(cfg.env);
  const trajdata::SuccessRule rule = success_rule(cfg);
  const SplitDataset base = trajdata::build_split(raw, rule, cfg.inclusion_prob, cfg.split_seed);
  std::vector<std::uint64_t> base_demo_ids;
  for (const auto& e : base.demos.episodes) base_demo_ids.push_back(e.id);

  // one split (and, for injection, one amended dataset) per axis value
  std::vector<SplitDataset> splits;
  std::vector<Dataset> amended_store;  // keeps injected raws alive for gt tables
  std::vector<const Dataset*> raw_for_value;
  for (double v : spec.values) {
    switch (spec.kind) {
      case AblationSpec::Kind::UnlabeledFraction:
        splits.push_back(restrict_unlabeled(base, v, cfg.split_seed));
        raw_for_value.push_back(&raw);
        break;
      case AblationSpec::Kind::DemoFraction:
        splits.push_back(trajdata::build_split(raw, rule, v, cfg.split_seed));
        raw_for_value.push_back(&raw);
        break;
      default: {
        const long n_new =
            static_cast<long>(std::ceil((v - 1.0) * static_cast<double>(base.unlabeled.episodes.size()) - 1e-9));
        amended_store.push_back(inject_low_quality(raw, env, std::max<long>(0, n_new), cfg.gen_seed));
        const Dataset& amended = amended_store.back();
        if (!out_root.empty() && n_new > 0) {
          fs::create_directories(out_root);
          trajdata::write_dataset(amended, out_root / ("amended_x" + fmt_f64(v) + ".bin"));
        }
        splits.push_back(trajdata::build_split_pinned(amended, base_demo_ids, cfg.split_seed));
        raw_for_value.push_back(&amended);
        break;
      }
    }
  }

  const bool need_gt =
      std::any_of(methods.begin(), methods.end(), [](TrainMethod m) { return m == TrainMethod::CrrGt; });
  std::vector<GtRewardTable> gt_tables;
  if (need_gt)
    for (const Dataset* r : raw_for_value) gt_tables.push_back(GtRewardTable::from_raw(*r));

  struct Cell {
    int value_idx;
    TrainMethod method;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (int vi = 0; vi < static_cast<int>(spec.values.size()); ++vi)
    for (TrainMethod m : methods)
      for (std::uint64_t s : cfg.seeds) cells.push_back({vi, m, s});

  std::vector<SummaryRow> rows(cells.size());
  run_jobs(static_cast<int>(cells.size()), thread_budget(), [&](int i) {
    const Cell& cell = cells[i];
    fs::path cell_dir;
    if (!out_root.empty())
      cell_dir = out_root / (std::string(spec.axis_name()) + "=" + fmt_f64(spec.values[cell.value_idx])) /
                 crragent::method_name(cell.method) / ("seed" + fmt_int(cell.seed));
    const GtRewardTable* gt = need_gt ? &gt_tables[cell.value_idx] : nullptr;
    CellResult r = run_training_cell(cfg, splits[cell.value_idx], gt, cell.method, cell.seed, cell_dir);
    rows[i] = {r.method, r.env, r.seed, r.score, spec.axis_name(), spec.values[cell.value_idx]};
  });
  canonical_sort(rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string method;
  std::string env;
  std::string axis;
  double axis_value = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

// Cross-seed mean and sample standard deviation per (method, env, axis cell).
inline std::vector<ReportRow> aggregate(std::vector<SummaryRow> rows) {
  canonical_sort(rows);
  std::vector<ReportRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].method == rows[i].method && rows[j].env == rows[i].env &&
           rows[j].axis == rows[i].axis && rows[j].axis_value == rows[i].axis_value)
      ++j;
    ReportRow r;
    r.method = rows[i].method;
    r.env = rows[i].env;
    r.axis = rows[i].axis;
    r.axis_value = rows[i].axis_value;
    r.n = static_cast<int>(j - i);
    for (std::size_t k = i; k < j; ++k) r.mean += rows[k].score;
    r.mean /= r.n;
    if (r.n > 1) {
      double ss = 0.0;
      for (std::size_t k = i; k < j; ++k) ss += (rows[k].score - r.mean) * (rows[k].score - r.mean);
      r.stddev = std::sqrt(ss / (r.n - 1));
    }
    out.push_back(std::move(r));
    i = j;
  }
  return out;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  const bool axes = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.axis.empty(); });
  std::string out = axes ? "method,env,axis,value,mean,std,n\n" : "method,env,mean,std,n\n";
  for (const ReportRow& r : rows) {
    out += r.method;
    out += ",";
    out += r.env;
    if (axes) {
      out += ",";
      out += r.axis;
      out += ",";
      out += fmt_f64(r.axis_value);
    }
    out += ",";
    out += fmt_f64(r.mean);
    out += ",";
    out += fmt_f64(r.stddev);
    out += ",";
    out += fmt_int(r.n);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset plumbing shared by the CLI subcommands
// ---------------------------------------------------------------------------

inline Dataset generate_from_config(const RunConfig& cfg) {
  const worldsim::Env env = worldsim::Env::by_name(cfg.env);
  std::vector<std::pair<worldsim::BehaviorPolicy, int>> mix;
  if (cfg.mix_scripted > 0) mix.emplace_back(worldsim::BehaviorPolicy::scripted_expert(), cfg.mix_scripted);
  if (cfg.mix_noisy > 0) mix.emplace_back(worldsim::BehaviorPolicy::noisy_expert(cfg.noisy_sigma), cfg.mix_noisy);
  if (cfg.mix_random > 0) mix.emplace_back(worldsim::BehaviorPolicy::random(), cfg.mix_random);
  if (mix.empty()) throw ConfigError("generation mix is empty; set mix_scripted/mix_noisy/mix_random");
  return worldsim::generate_dataset(env, mix, cfg.gen_seed);
}

inline Dataset load_dataset(const std::string& path) {
  if (path.empty()) throw FileError("no dataset path given (set --dataset or the config's dataset key)");
  if (!fs::exists(path)) throw FileError("dataset not found: " + path);
  return trajdata::read_dataset(path);
}

// Full `train` subcommand body: split the raw data per config, run every
// requested seed for one method, write per-seed outputs plus summary.csv.
inline std::vector<SummaryRow> run_train_command(const RunConfig& cfg, const Dataset& raw,
                                                 const fs::path& out_dir) {
  const TrainMethod method = crragent::parse_method(cfg.method);
  const SplitDataset split = trajdata::build_split(raw, success_rule(cfg), cfg.inclusion_prob, cfg.split_seed);
  std::optional<GtRewardTable> gt;
  if (method == TrainMethod::CrrGt) gt.emplace(GtRewardTable::from_raw(raw));
  std::vector<SummaryRow> rows(cfg.seeds.size());
  run_jobs(static_cast<int>(cfg.seeds.size()), thread_budget(), [&](int i) {
    const std::uint64_t seed = cfg.seeds[i];
    fs::path cell_dir = out_dir.empty() ? fs::path() : out_dir / ("seed" + fmt_int(seed));
    CellResult r = run_training_cell(cfg, split, gt ? &*gt : nullptr, method, seed, cell_dir);
    rows[i] = {r.method, r.env, r.seed, r.score, "", 0.0};
  });
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_summary_csv(out_dir / "summary.csv", rows);
  }
  canonical_sort(rows);
  return rows;
}

}  // namespace oril::labcli
