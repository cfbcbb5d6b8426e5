#include <CLI11.hpp>

#include <iostream>

#include "aolo/commands.hpp"

namespace {

void add_common(CLI::App* cmd, aolo::CommandOptions& opts, std::optional<std::uint64_t>& seed,
                std::optional<std::string>& out_dir) {
  cmd->add_option("-c,--config", opts.config_path, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "override one key, section.name=value (repeatable)");
  cmd->add_option("--seed", seed, "run.seed");
  cmd->add_option("-o,--out-dir", out_dir, "output directory (overrides AOLO_OUT_DIR and run.out_dir)");
}

}  // namespace

int main(int argc, char** argv) {
  aolo::retain_heap_blocks();
  CLI::App app{"Carbon-aware output-length and transmit-power control for LLM serving"};
  app.require_subcommand(1);

  aolo::CommandOptions opts;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> policy;
  std::optional<long> steps;

  auto* train = app.add_subcommand("train", "train a policy and write metrics, checkpoints and a summary");
  add_common(train, opts, seed, out_dir);
  train->add_option("-p,--policy", policy, "snn, mlp or random")->check(CLI::IsMember({"snn", "mlp", "random"}));
  train->add_option("--steps", steps, "environment steps (0: episodes * steps_per_episode)");

  std::string checkpoint;
  std::optional<int> n_states;
  bool against_oracle = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out states");
  add_common(eval, opts, seed, out_dir);
  eval->add_option("checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("-n,--states", n_states, "number of held-out states");
  eval->add_flag("--against-oracle", against_oracle, "compare carbon with the grid oracle");

  std::optional<int> resolution;
  auto* oracle = app.add_subcommand("oracle", "grid-search the optimal action for held-out states");
  add_common(oracle, opts, seed, out_dir);
  oracle->add_option("-n,--states", n_states, "number of held-out states");
  oracle->add_option("-r,--resolution", resolution, "grid points per action axis");

  std::string axis;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds{1};
  auto* sweep = app.add_subcommand("sweep", "train one run per (value, seed) along an axis");
  add_common(sweep, opts, seed, out_dir);
  sweep->add_option("-p,--policy", policy, "snn, mlp or random")->check(CLI::IsMember({"snn", "mlp", "random"}));
  sweep->add_option("--steps", steps, "environment steps per run");
  sweep->add_option("axis", axis, "hidden_size, t_snn, encoder_dim, decoder_dim or outage")
      ->required()
      ->check(CLI::IsMember(aolo::sweep_axes()));
  sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "training seeds")->delimiter(',');

  int draws = 20;
  long samples = 1'000'000;
  double tolerance = 0.01;
  auto* check = app.add_subcommand("channel-check", "compare quadrature averages with Monte-Carlo estimates");
  add_common(check, opts, seed, out_dir);
  check->add_option("--draws", draws, "random channel draws")->check(CLI::PositiveNumber);
  check->add_option("--samples", samples, "Monte-Carlo samples per draw")->check(CLI::PositiveNumber);
  check->add_option("--tolerance", tolerance, "largest acceptable relative error")->check(CLI::PositiveNumber);

  auto* dump = app.add_subcommand("config", "print the resolved configuration as documented INI");
  add_common(dump, opts, seed, out_dir);

  CLI11_PARSE(app, argc, argv);
  opts.seed = seed;
  opts.out_dir = out_dir;
  opts.policy = policy;
  opts.steps = steps;

  try {
    if (*train) return aolo::cmd_train(opts);
    if (*eval) return aolo::cmd_eval(opts, checkpoint, n_states, against_oracle);
    if (*oracle) return aolo::cmd_oracle(opts, n_states, resolution);
    if (*sweep) return aolo::cmd_sweep(opts, axis, values, seeds);
    if (*check) return aolo::cmd_channel_check(opts, draws, samples, tolerance);
    if (*dump) {
      std::cout << aolo::dump_config(aolo::resolve_config(opts));
      return 0;
    }
  } catch (const aolo::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 3;
  } catch (const aolo::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
