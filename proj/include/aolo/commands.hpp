#pragma once

// Subcommand implementations behind tools/aolo. Each writes into an output
// directory and returns a process exit status.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "aolo/checkpoint.hpp"
#include "aolo/config.hpp"
#include "aolo/report.hpp"
#include "aolo/rl.hpp"

namespace aolo {

namespace fs = std::filesystem;

/// Options shared by every subcommand. Precedence, lowest first: built-in
/// defaults, config file, --set overrides, dedicated flags.
struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<long> steps;
  std::optional<std::string> out_dir;
  std::ostream* log = &std::cout;
};

inline RunConfig resolve_config(const CommandOptions& opts, RunConfig base = {}) {
  RunConfig cfg = std::move(base);
  if (!opts.config_path.empty()) cfg = load_config_file(opts.config_path, cfg);
  for (const auto& o : opts.overrides) apply_override(cfg, o);
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.policy) cfg.run.policy = *opts.policy;
  if (opts.steps) cfg.run.steps = *opts.steps;
  if (opts.out_dir) {
    cfg.run.out_dir = *opts.out_dir;
  } else if (const char* env = std::getenv("AOLO_OUT_DIR"); env && *env) {
    cfg.run.out_dir = env;
  }
  cfg.validate();
  return cfg;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

/// Creates `dir` and freezes the resolved configuration next to the outputs.
inline fs::path prepare_dir(const fs::path& dir, const RunConfig& cfg, const std::string& name = "config.ini") {
  fs::create_directories(dir);
  write_text(dir / name, dump_config(cfg));
  return dir;
}

inline unsigned worker_count(const RunConfig& cfg) {
  if (cfg.run.jobs > 0) return static_cast<unsigned>(cfg.run.jobs);
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// failure after all workers stop.
/// Keeps freed blocks of up to 32 MiB in the heap. Training allocates
/// megabyte-sized temporaries every step; without this glibc maps and unmaps
/// them each time and page faults cost about a fifth of the run time.
inline void retain_heap_blocks() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  jobs = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<State> evaluation_states(const RunConfig& cfg, int n) {
  Rng rng(cfg.run.eval_seed);
  return sample_states(static_cast<std::size_t>(n), cfg.env_config().ranges, rng);
}

inline SpikingActor<float> make_snn_actor(const RunConfig& cfg, Rng& rng) { return SpikingActor<float>(cfg.snn, rng); }

inline MlpActor<float> make_mlp_actor(const RunConfig& cfg, Rng& rng) {
  return MlpActor<float>(State::kDim, kActionDim, cfg.mlp.hidden, rng);
}

inline nlohmann::json eval_json(const PolicyEval& ev) {
  nlohmann::json j;
  j["states"] = ev.n;
  j["mean_reward"] = ev.mean_reward;
  j["mean_carbon_mg"] = ev.mean_carbon ? nlohmann::json(*ev.mean_carbon * 1e3) : nlohmann::json(nullptr);
  j["feasibility"] = ev.feasibility_rate;
  return j;
}

struct TrainOutcome {
  RunSummary summary{1};
  PolicyEval eval;
  long td_targets_out_of_range = 0;
  nlohmann::json record;
};

namespace detail {

template <typename Actor>
void train_actor(Actor actor, const RunConfig& cfg, const fs::path& dir, Rng& rng, const MetricsSink& sink,
                 TrainOutcome& out) {
  const TrainerConfig tc = cfg.trainer_config();
  const EnvConfig env = cfg.env_config();
  Trainer<Actor> trainer(std::move(actor), tc, env, rng);
  const long total = cfg.total_steps();
  const long every = cfg.run.checkpoint_every > 0 ? cfg.run.checkpoint_every : total;
  const std::string meta = dump_config(cfg);
  if (cfg.run.checkpoint_every > 0) fs::create_directories(dir / "checkpoints");
  while (trainer.step_count() < total) {
    trainer.train(rng, sink, std::min(every, total - trainer.step_count()));
    if (cfg.run.checkpoint_every > 0)
      save_checkpoint((dir / "checkpoints" / fmt::format("step_{:07d}.ckpt", trainer.step_count())).string(),
                      trainer.checkpoint(meta));
  }
  save_checkpoint((dir / "final.ckpt").string(), trainer.checkpoint(meta));
  out.eval = evaluate_policy(trainer.actor(), evaluation_states(cfg, cfg.run.eval_states), env);
  out.td_targets_out_of_range = trainer.td_targets_out_of_range();
}

}  // namespace detail

/// Trains one run of cfg.run.policy into `dir`: config.ini, metrics.csv,
/// checkpoints (learned policies only) and summary.json.
inline TrainOutcome train_run(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  prepare_dir(dir, cfg);
  const auto started = std::chrono::steady_clock::now();
  TrainOutcome out;
  out.summary = RunSummary(cfg.total_steps());
  MetricsCsv csv((dir / "metrics.csv").string());
  const long report_every = std::max(1L, cfg.total_steps() / 20);
  const MetricsSink sink = [&](const StepMetrics& m) {
    csv(m);
    out.summary(m);
    if ((m.step + 1) % report_every == 0)
      log << fmt::format("step {:>7}  reward {:>9.3f}  kappa {:>5}  p {:>6.2f}  feasible {}\n", m.step + 1, m.reward,
                         m.kappa, m.p_trans, m.feasible ? 1 : 0)
          << std::flush;
  };

  Rng rng(cfg.run.seed);
  const EnvConfig env = cfg.env_config();
  if (cfg.run.policy == "random") {
    run_random_policy(cfg.trainer_config(), env, rng, sink, cfg.total_steps());
    const auto states = evaluation_states(cfg, cfg.run.eval_states);
    Rng action_rng(cfg.run.eval_seed + 1);
    std::vector<Action> actions;
    for (std::size_t i = 0; i < states.size(); ++i) actions.push_back(to_action(uniform_raw_action(action_rng), env.box));
    out.eval = evaluate_actions(states, actions, env);
  } else if (cfg.run.policy == "snn") {
    detail::train_actor(make_snn_actor(cfg, rng), cfg, dir, rng, sink, out);
  } else {
    detail::train_actor(make_mlp_actor(cfg, rng), cfg, dir, rng, sink, out);
  }
  csv.close();

  const RunSummary& s = out.summary;
  nlohmann::json j;
  j["policy"] = cfg.run.policy;
  j["seed"] = cfg.run.seed;
  j["steps"] = s.steps();
  j["updates"] = s.updates();
  j["final_mean_reward"] = s.final_mean_reward();
  j["final_mean_carbon_mg"] = s.final_mean_carbon_mg() ? nlohmann::json(*s.final_mean_carbon_mg()) : nlohmann::json(nullptr);
  j["final_feasibility"] = s.final_feasibility();
  j["early_mean_reward"] = s.early_mean_reward();
  j["td_targets_out_of_range"] = out.td_targets_out_of_range;
  j["eval"] = eval_json(out.eval);
  out.record = j;
  write_text(dir / "summary.json", j.dump(2) + "\n");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  log << fmt::format("{} run finished in {:.1f} s: final reward {:.3f}, eval feasibility {:.3f}\n", cfg.run.policy,
                     seconds, s.final_mean_reward(), out.eval.feasibility_rate);
  return out;
}

inline int cmd_train(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  try {
    const TrainOutcome out = train_run(cfg, cfg.run.out_dir, *opts.log);
    *opts.log << out.record.dump(2) << "\n";
  } catch (const TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

/// Architecture keys that a checkpoint fixes.
inline bool is_architecture_key(const std::string& key) {
  return key == "run.policy" || key.rfind("snn.", 0) == 0 || key == "mlp.hidden";
}

inline int cmd_eval(const CommandOptions& opts, const std::string& checkpoint_path, std::optional<int> n_states,
                    bool against_oracle) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig saved;
  std::istringstream meta(ckpt.meta);
  apply_ini(saved, meta, checkpoint_path);
  const RunConfig cfg = resolve_config(opts, saved);
  for (const auto& f : config_fields()) {
    if (!is_architecture_key(f.key)) continue;
    const std::string a = get_config_value(saved, f.key), b = get_config_value(cfg, f.key);
    if (a != b)
      throw CheckpointError(fmt::format("checkpoint/config mismatch: {} is '{}' in the checkpoint but '{}' in the configuration",
                                        f.key, a, b));
  }
  if (cfg.run.policy == "random") throw CheckpointError("random policies have no checkpoint");

  const EnvConfig env = cfg.env_config();
  const auto states = evaluation_states(cfg, n_states.value_or(cfg.run.eval_states));
  Rng rng(0);
  std::vector<Action> actions;
  if (cfg.run.policy == "snn") {
    auto actor = make_snn_actor(cfg, rng);
    ckpt.restore(actor.param_names("actor."), actor.params());
    actions = policy_actions(actor, states, env);
  } else {
    auto actor = make_mlp_actor(cfg, rng);
    ckpt.restore(actor.param_names("actor."), actor.params());
    actions = policy_actions(actor, states, env);
  }
  const PolicyEval ev = evaluate_actions(states, actions, env);

  const fs::path dir = prepare_dir(cfg.run.out_dir, cfg, "eval_config.ini");
  nlohmann::json j;
  j["checkpoint"] = checkpoint_path;
  j["eval_seed"] = cfg.run.eval_seed;
  j["eval"] = eval_json(ev);
  std::vector<OracleResult> best;
  if (against_oracle) {
    best.resize(states.size());
    parallel_for(states.size(), worker_count(cfg),
                 [&](std::size_t i) { best[i] = grid_oracle(states[i], cfg.run.oracle_resolution, env); });
  }
  auto table = fmt::output_file((dir / "eval.csv").string());
  table.print("index,kappa,p_trans,feasible,carbon_mg{}\n", against_oracle ? ",oracle_kappa,oracle_p_trans,oracle_carbon_mg" : "");
  double policy_sum = 0.0, oracle_sum = 0.0;
  std::size_t paired = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const EvalReport& rep = ev.reports[i];
    table.print("{},{},{},{},{}", i, actions[i].kappa, actions[i].p_trans, rep.feasible ? 1 : 0, rep.carbon_total * 1e3);
    if (against_oracle) {
      const OracleResult& b = best[i];
      table.print(",{},{},{}", b.action.kappa, b.action.p_trans, b.report.carbon_total * 1e3);
      if (rep.feasible && b.report.feasible) {
        policy_sum += rep.carbon_total;
        oracle_sum += b.report.carbon_total;
        ++paired;
      }
    }
    table.print("\n");
  }
  table.close();
  if (against_oracle) {
    std::vector<Action> oracle_actions;
    for (const auto& b : best) oracle_actions.push_back(b.action);
    j["oracle_resolution"] = cfg.run.oracle_resolution;
    j["oracle"] = eval_json(evaluate_actions(states, oracle_actions, env));
    j["paired_states"] = paired;
    j["carbon_ratio_to_oracle"] = paired ? nlohmann::json(policy_sum / oracle_sum) : nlohmann::json(nullptr);
  }
  write_text(dir / "eval.json", j.dump(2) + "\n");
  *opts.log << j.dump(2) << "\n";
  return 0;
}

inline int cmd_oracle(const CommandOptions& opts, std::optional<int> n_states, std::optional<int> resolution) {
  RunConfig cfg = resolve_config(opts);
  if (resolution) cfg.run.oracle_resolution = *resolution;
  cfg.validate();
  const EnvConfig env = cfg.env_config();
  const auto states = evaluation_states(cfg, n_states.value_or(cfg.run.eval_states));
  const fs::path dir = prepare_dir(cfg.run.out_dir, cfg, "oracle_config.ini");
  auto out = fmt::output_file((dir / "oracle.csv").string());
  out.print("index,m,omega,bandwidth_mhz,zeta1,zeta2,kappa,p_trans,reward,carbon_mg,feasible\n");
  std::vector<OracleResult> best(states.size());
  parallel_for(states.size(), worker_count(cfg),
               [&](std::size_t i) { best[i] = grid_oracle(states[i], cfg.run.oracle_resolution, env); });
  double reward_sum = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const State& s = states[i];
    const OracleResult& b = best[i];
    reward_sum += b.reward;
    out.print("{},{},{},{},{},{},{},{},{},{},{}\n", i, s.m, s.omega, s.bandwidth / 1e6, s.zeta1, s.zeta2, b.action.kappa,
              b.action.p_trans, b.reward, b.report.carbon_total * 1e3, b.report.feasible ? 1 : 0);
  }
  out.close();
  *opts.log << fmt::format("{} states at resolution {}: mean optimal reward {}\n", states.size(),
                           cfg.run.oracle_resolution, reward_sum / double(states.size()));
  return 0;
}

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"hidden_size", "t_snn", "encoder_dim", "decoder_dim", "outage"};
  return axes;
}

/// Applies one sweep value to a configuration.
inline void apply_sweep_value(RunConfig& cfg, const std::string& axis, double value) {
  auto as_int = [&](double v) {
    if (v != std::floor(v) || v < 1) throw ConfigError("sweep axis " + axis + " needs positive integer values");
    return static_cast<int>(v);
  };
  if (axis == "hidden_size") {
    const int h = as_int(value);
    cfg.snn.hidden.assign(cfg.snn.hidden.size(), h);
    cfg.mlp.hidden.assign(cfg.mlp.hidden.size(), h);
  } else if (axis == "t_snn") {
    cfg.snn.t_snn = as_int(value);
  } else if (axis == "encoder_dim") {
    cfg.snn.encoder_dim = as_int(value);
  } else if (axis == "decoder_dim") {
    cfg.snn.decoder_dim = as_int(value);
  } else if (axis == "outage") {
    cfg.env.epsilon = value;
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "' (expected hidden_size, t_snn, encoder_dim, decoder_dim or outage)");
  }
}

constexpr const char* kSweepHeader =
    "axis,value,seed,final_mean_reward,final_mean_carbon_mg,final_feasibility,early_mean_reward,eval_mean_carbon_mg,"
    "eval_feasibility";

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::uint64_t seed = 0;
  TrainOutcome outcome;
};

inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& axis, const std::vector<double>& values,
                                       const std::vector<std::uint64_t>& seeds, const fs::path& dir, std::ostream& log) {
  if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end())
    throw ConfigError("unknown sweep axis '" + axis + "' (expected hidden_size, t_snn, encoder_dim, decoder_dim or outage)");
  if (values.empty() || seeds.empty()) throw ConfigError("sweep needs at least one value and one seed");
  prepare_dir(dir, base, "sweep_config.ini");
  std::vector<SweepRow> rows;
  std::vector<RunConfig> configs;
  for (double v : values) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      apply_sweep_value(cfg, axis, v);
      cfg.run.seed = seed;
      cfg.validate();
      rows.push_back({axis, v, seed, {}});
      configs.push_back(std::move(cfg));
    }
  }
  const unsigned jobs = worker_count(base);
  std::mutex log_mutex;
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    SweepRow& row = rows[i];
    const fs::path run_dir = dir / fmt::format("{}_{}_seed{}", axis, row.value, row.seed);
    {
      std::lock_guard lock(log_mutex);
      log << fmt::format("sweep {}={} seed {}\n", axis, row.value, row.seed) << std::flush;
    }
    if (jobs <= 1) {
      row.outcome = train_run(configs[i], run_dir, log);
    } else {
      std::ostringstream run_log;
      row.outcome = train_run(configs[i], run_dir, run_log);
      std::lock_guard lock(log_mutex);
      log << fmt::format("sweep {}={} seed {} done\n", axis, row.value, row.seed) << std::flush;
    }
  });
  auto out = fmt::output_file((dir / "sweep.csv").string());
  out.print("{}\n", kSweepHeader);
  for (const SweepRow& row : rows) {
    const RunSummary& s = row.outcome.summary;
    const auto& ev = row.outcome.eval;
    out.print("{},{},{},{},{},{},{},{},{}\n", axis, row.value, row.seed, s.final_mean_reward(),
              format_value(s.final_mean_carbon_mg()), s.final_feasibility(), s.early_mean_reward(),
              format_value(ev.mean_carbon ? std::optional<double>(*ev.mean_carbon * 1e3) : std::nullopt),
              ev.feasibility_rate);
  }
  out.close();
  return rows;
}

inline int cmd_sweep(const CommandOptions& opts, const std::string& axis, const std::vector<double>& values,
                     const std::vector<std::uint64_t>& seeds) {
  const RunConfig cfg = resolve_config(opts);
  run_sweep(cfg, axis, values, seeds, cfg.run.out_dir, *opts.log);
  return 0;
}

struct ChannelCheckRow {
  ChannelParams channel;
  double p_trans = 0.0;
  double epsilon = 0.0;
  double zeta2 = 0.0;   // gCO2/kWh
  double kappa = 0.0;
  double quad_time = 0.0, mc_time = 0.0;
  double quad_carbon = 0.0, mc_carbon = 0.0;
  double reference_time = 0.0;  // quadrature at tight tolerance

  double time_error() const { return std::abs(quad_time - mc_time) / mc_time; }
  double carbon_error() const { return std::abs(quad_carbon - mc_carbon) / mc_carbon; }
  double reference_error() const { return std::abs(quad_time - reference_time) / reference_time; }
};

/// Quadrature against conditional Monte-Carlo for random channel draws. The
/// first draw uses ε = 1e-6 to exercise the unconditional limit.
inline std::vector<ChannelCheckRow> channel_check(const RunConfig& cfg, int draws, long samples) {
  const EnvConfig env = cfg.env_config();
  Rng rng(cfg.run.seed);
  const QuadratureSpec tight{1e-13, 1e-300, 2000};
  std::vector<ChannelCheckRow> rows;
  for (int d = 0; d < draws; ++d) {
    ChannelCheckRow r;
    const State s = sample_state(env.ranges, rng);
    r.channel = channel_of(s, env);
    r.p_trans = rng.uniform(env.box.p_min, env.box.p_max);
    r.epsilon = d == 0 ? 1e-6 : rng.uniform(0.01, 0.3);
    r.zeta2 = s.zeta2;
    r.kappa = std::round(rng.uniform(42.0, 137.0));
    const LinkBudget budget = make_link_budget(r.channel, r.p_trans, r.epsilon);
    const double zeta2 = per_joule(s.zeta2);
    r.quad_time = avg_trans_time(env.comm, r.channel, budget, r.kappa, env.quadrature);
    r.quad_carbon = avg_comm_carbon(env.comm, r.channel, budget, zeta2, r.kappa, env.quadrature);
    r.reference_time = avg_trans_time(env.comm, r.channel, budget, r.kappa, tight);
    double time_sum = 0.0, carbon_sum = 0.0;
    for (long i = 0; i < samples; ++i) {
      const double gamma = sample_snr_conditional(r.channel, budget, rng);
      time_sum += trans_time(env.comm, r.channel, r.kappa, gamma);
      carbon_sum += comm_carbon_instant(env.comm, r.channel, zeta2, r.kappa, r.p_trans, gamma);
    }
    r.mc_time = time_sum / double(samples);
    r.mc_carbon = carbon_sum / double(samples);
    rows.push_back(r);
  }
  return rows;
}

inline int cmd_channel_check(const CommandOptions& opts, int draws = 20, long samples = 1'000'000, double tolerance = 0.01) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_dir(cfg.run.out_dir, cfg, "channel_check_config.ini");
  const auto rows = channel_check(cfg, draws, samples);
  auto out = fmt::output_file((dir / "channel_check.csv").string());
  out.print(
      "draw,m,omega,bandwidth_mhz,p_trans,epsilon,zeta2,kappa,quad_trans_time,mc_trans_time,rel_err_trans_time,"
      "quad_comm_carbon,mc_comm_carbon,rel_err_comm_carbon,rel_err_vs_tight_quadrature\n");
  double worst = 0.0, worst_reference = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out.print("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", i, r.channel.m, r.channel.omega, r.channel.bandwidth / 1e6,
              r.p_trans, r.epsilon, r.zeta2, r.kappa, r.quad_time, r.mc_time, r.time_error(), r.quad_carbon, r.mc_carbon,
              r.carbon_error(), r.reference_error());
    worst = std::max({worst, r.time_error(), r.carbon_error()});
    worst_reference = std::max(worst_reference, r.reference_error());
  }
  out.close();
  *opts.log << fmt::format("{} draws, {} samples each: max relative error vs Monte-Carlo {:.3e} (limit {:.0e}); "
                           "max quadrature error vs tight tolerance {:.3e}\n",
                           rows.size(), samples, worst, tolerance, worst_reference);
  return worst <= tolerance ? 0 : 1;
}

}  // namespace aolo
