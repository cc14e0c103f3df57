// oril: offline imitation lab driver.
//
//   oril gen    --config cfg.txt --out data.bin
//   oril train  --config cfg.txt [--dataset data.bin] [--method m] [--seed s] [--out dir]
//   oril eval   --config cfg.txt --checkpoint ck.bin [--episodes n] [--seed s]
//   oril ablate --config cfg.txt --axis unlabeled_fraction --values 0.25,0.5,1.0 [--out dir]
//   oril report --summary out/summary.csv [--out report.csv]

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oril/labcli.hpp"

namespace {

using namespace oril;

struct Flags {
  std::string config;
  std::string dataset;
  std::string method;
  std::string out;
  std::string checkpoint;
  std::string summary;
  std::string axis;
  std::vector<double> values;
  std::optional<std::uint64_t> seed;
  int episodes = 20;
};

labcli::RunConfig config_with_overrides(const Flags& f) {
  labcli::RunConfig cfg = labcli::load_config(f.config);
  if (!f.method.empty()) cfg.method = f.method;
  if (!f.dataset.empty()) cfg.dataset = f.dataset;
  if (f.seed) cfg.seeds = {*f.seed};
  labcli::validate_config(cfg);
  return cfg;
}

int cmd_gen(const Flags& f) {
  const labcli::RunConfig cfg = config_with_overrides(f);
  trajdata::Dataset data = labcli::generate_from_config(cfg);
  trajdata::write_dataset(data, f.out);
  std::cout << "wrote " << f.out << ": " << data.episodes.size() << " episodes, env=" << data.env_name
            << ", obs_dim=" << data.obs_dim << ", act_dim=" << data.act_dim << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  const labcli::RunConfig cfg = config_with_overrides(f);
  const trajdata::Dataset raw = labcli::load_dataset(cfg.dataset);
  for (const labcli::SummaryRow& r : labcli::run_train_command(cfg, raw, f.out))
    std::cout << r.method << " env=" << r.env << " seed=" << r.seed << " score=" << labcli::fmt_f64(r.score)
              << "\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  const labcli::RunConfig cfg = config_with_overrides(f);
  const worldsim::Env env = worldsim::Env::by_name(cfg.env);
  diffcore::Approximator policy(diffcore::Topology{env.spec().obs_dim, cfg.hidden_width, cfg.hidden_layers,
                                                   diffcore::HeadSpec::gmm(cfg.gmm_components, env.spec().act_dim)});
  bool found = false;
  for (const diffcore::CheckpointEntry& e : diffcore::read_checkpoint(f.checkpoint)) {
    if (e.name != "policy") continue;
    if (e.descriptor != policy.topology().descriptor())
      throw ConfigError("checkpoint policy shape " + e.descriptor + " does not match config " +
                        policy.topology().descriptor());
    policy.params() = e.params;
    found = true;
  }
  if (!found) throw labcli::FileError("no 'policy' entry in " + f.checkpoint);

  const std::uint64_t seed = f.seed ? *f.seed : cfg.eval_seed;
  const double ret = crragent::evaluate(policy, env, f.episodes, seed, cfg.eval_sample);
  std::cout << "mean return over " << f.episodes << " episodes: " << labcli::fmt_f64(ret) << "\n";
  return 0;
}

labcli::AblationSpec ablation_spec(const std::string& axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("--values must list at least one number");
  if (axis == "unlabeled_fraction") return labcli::AblationSpec::unlabeled_fraction(values);
  if (axis == "demo_fraction") return labcli::AblationSpec::demo_fraction(values);
  if (axis == "low_quality_injection") {
    if (values.size() != 1) throw ConfigError("low_quality_injection takes a single multiplier");
    return labcli::AblationSpec::low_quality_injection(values[0]);
  }
  throw ConfigError("unknown ablation axis: " + axis);
}

int cmd_ablate(const Flags& f) {
  const labcli::RunConfig cfg = config_with_overrides(f);
  const trajdata::Dataset raw = labcli::load_dataset(cfg.dataset);
  const labcli::AblationSpec spec = ablation_spec(f.axis, f.values);
  std::vector<labcli::SummaryRow> rows =
      labcli::run_ablation(cfg, raw, spec, {crragent::parse_method(cfg.method)}, f.out);
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    labcli::write_summary_csv(std::filesystem::path(f.out) / "summary.csv", rows);
  }
  for (const labcli::SummaryRow& r : rows)
    std::cout << r.method << " " << r.axis << "=" << labcli::fmt_f64(r.axis_value) << " seed=" << r.seed
              << " score=" << labcli::fmt_f64(r.score) << "\n";
  return 0;
}

int cmd_report(const Flags& f) {
  std::vector<labcli::SummaryRow> rows = labcli::read_summary_csv(f.summary);
  const std::string csv = labcli::report_csv(labcli::aggregate(std::move(rows)));
  if (f.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream file(f.out, std::ios::trunc);
    if (!file) throw labcli::FileError("cannot write " + f.out);
    file << csv;
    std::cout << "wrote " << f.out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline imitation lab: dataset generation, reward learning, offline RL"};
  app.require_subcommand(1);
  Flags f;

  auto add_config = [&f](CLI::App* sub) { sub->add_option("--config", f.config, "run config file")->required(); };
  auto add_overrides = [&f](CLI::App* sub) {
    sub->add_option("--dataset", f.dataset, "dataset file (overrides config)");
    sub->add_option("--method", f.method, "training method (overrides config)");
    sub->add_option("--seed", f.seed, "single seed (overrides config seed list)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset from the config's behavior mix");
  add_config(gen);
  gen->add_option("--out", f.out, "output dataset file")->required();

  CLI::App* train = app.add_subcommand("train", "train one method across the config's seeds");
  add_config(train);
  add_overrides(train);
  train->add_option("--out", f.out, "output directory for metrics, checkpoints, summary.csv");

  CLI::App* eval = app.add_subcommand("eval", "mean return of a checkpointed policy over seeded episodes");
  add_config(eval);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint file holding a 'policy' entry")->required();
  eval->add_option("--episodes", f.episodes, "episode count")->capture_default_str();
  eval->add_option("--seed", f.seed, "evaluation seed (default: config eval_seed)");

  CLI::App* ablate = app.add_subcommand("ablate", "run a grid of training cells along one data axis");
  add_config(ablate);
  add_overrides(ablate);
  ablate->add_option("--axis", f.axis, "unlabeled_fraction | low_quality_injection | demo_fraction")->required();
  ablate->add_option("--values", f.values, "comma-separated axis values")->required()->delimiter(',');
  ablate->add_option("--out", f.out, "output directory for cell metrics and summary.csv");

  CLI::App* report = app.add_subcommand("report", "aggregate a summary.csv into per-cell mean and std");
  report->add_option("--summary", f.summary, "summary.csv from train or ablate")->required();
  report->add_option("--out", f.out, "output csv (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen(f);
    if (train->parsed()) return cmd_train(f);
    if (eval->parsed()) return cmd_eval(f);
    if (ablate->parsed()) return cmd_ablate(f);
    return cmd_report(f);
  } catch (const std::exception& e) {
    std::cerr << "oril: " << e.what() << "\n";
    return 1;
  }
}
