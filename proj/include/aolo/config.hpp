#pragma once

// Run configuration: INI file with sections, `section.key=value` overrides,
// and a frozen dump that reads back to the identical configuration.
//
// Values are held in the units an operator writes (MHz, g/kWh, kg, years,
// TFLOP); env_config() and friends convert to SI.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <fmt/format.h>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aolo/env.hpp"
#include "aolo/errors.hpp"
#include "aolo/rl.hpp"
#include "aolo/snn.hpp"

namespace aolo {

struct RunConfig {
  struct Run {
    std::uint64_t seed = 1;
    std::string policy = "snn";
    std::string out_dir = "runs";
    long steps = 0;  // 0: episodes * steps_per_episode
    long checkpoint_every = 10000;
    int eval_states = 100;
    std::uint64_t eval_seed = 777;
    int oracle_resolution = 400;
    int jobs = 0;  // 0: one per hardware thread
  } run;

  struct Env {
    double m_min = 2.0, m_max = 12.0;
    double omega_min = 0.1, omega_max = 10.0;
    double bandwidth_min_mhz = 15.0, bandwidth_max_mhz = 25.0;
    double zeta1_min = 50.0, zeta1_max = 150.0;
    double zeta2_min = 400.0, zeta2_max = 900.0;
    double noise_var_w = 1.0;
    double epsilon = 0.1;
    double kappa_min = 1.0, kappa_max = 1000.0;
    double p_min_w = 0.1, p_max_w = 60.0;
    double reward_scale = 1000.0;
    double penalty = -100.0;
  } env;

  struct Inference {
    double n_gpu = 8.0;
    double p_gpu_kw = 0.428;
    double pue = 1.58;
    double psi_oi_tflop = 0.35;
    double psi_iw = 5.0;
    double omega_pf_tflops = 156.0;
    double alpha = 0.8;
    double c_gpu_kg = 318.0;
    double t_dc_years = 3.0;
  } inference;

  struct Comm {
    double beta_bits = 50.0;
    double p_fixed_w = 600.0;
    double k_rate_mbps = 1000.0;
    double t_bs_years = 10.0;
    double c_bs_kg = 6500.0;
  } comm;

  struct Qoe {
    double a = 2.0;
    double b = 40.0;
    double q_max = 10.0;
  } qoe;

  struct Constraints {
    double q_th = 7.0;
    double e_th = 1600.0;
    double rho1 = 1.0;
    double rho2 = 10.0;
    double t_infer_th_s = 0.3;
    double t_trans_th_ms = 0.5;
    double p_trans_max_w = 60.0;
  } constraints;

  struct Quadrature {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    int max_subdivisions = 200;
  } quadrature;

  struct Trainer {
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    double discount = 0.99;
    double tau = 0.005;
    int batch = 512;
    double noise_sigma = 0.1;
    long warmup = 1000;
    long episodes = 300;
    long steps_per_episode = 100;
    long buffer_capacity = 1'000'000;
    std::vector<int> critic_hidden{256, 256};
    double critic_final_scale = 3e-3;
  } trainer;

  SnnConfig snn;

  struct Mlp {
    std::vector<int> hidden{256, 256};
  } mlp;

  EnvConfig env_config() const {
    EnvConfig c;
    c.ranges.m = {env.m_min, env.m_max};
    c.ranges.omega = {env.omega_min, env.omega_max};
    c.ranges.bandwidth = {env.bandwidth_min_mhz * 1e6, env.bandwidth_max_mhz * 1e6};
    c.ranges.zeta1 = {env.zeta1_min, env.zeta1_max};
    c.ranges.zeta2 = {env.zeta2_min, env.zeta2_max};
    c.box = {env.kappa_min, env.kappa_max, env.p_min_w, env.p_max_w};
    c.noise_var = env.noise_var_w;
    c.epsilon = env.epsilon;
    c.inference.n_gpu = inference.n_gpu;
    c.inference.p_gpu = inference.p_gpu_kw * 1e3;
    c.inference.pue = inference.pue;
    c.inference.psi_oi = inference.psi_oi_tflop * 1e12;
    c.inference.psi_iw = inference.psi_iw;
    c.inference.omega_pf = inference.omega_pf_tflops * 1e12;
    c.inference.alpha = inference.alpha;
    c.inference.c_gpu_emb = inference.c_gpu_kg * 1e3;
    c.inference.t_dc = inference.t_dc_years * kSecondsPerYear;
    c.comm.beta = comm.beta_bits;
    c.comm.p_fixed = comm.p_fixed_w;
    c.comm.k_rate = comm.k_rate_mbps * 1e6;
    c.comm.t_bs = comm.t_bs_years * kSecondsPerYear;
    c.comm.c_bs_emb = comm.c_bs_kg * 1e3;
    c.qoe = {qoe.a, qoe.b, qoe.q_max};
    c.constraints = {constraints.q_th,         constraints.e_th,
                     constraints.rho1,         constraints.rho2,
                     constraints.t_infer_th_s, constraints.t_trans_th_ms * 1e-3,
                     constraints.p_trans_max_w};
    c.quadrature = {quadrature.rel_tol, quadrature.abs_tol, quadrature.max_subdivisions};
    c.reward_scale = env.reward_scale;
    c.penalty = env.penalty;
    return c;
  }

  TrainerConfig trainer_config() const {
    TrainerConfig c;
    c.lr_actor = trainer.lr_actor;
    c.lr_critic = trainer.lr_critic;
    c.discount = trainer.discount;
    c.tau = trainer.tau;
    c.batch = trainer.batch;
    c.noise_sigma = trainer.noise_sigma;
    c.warmup = trainer.warmup;
    c.episodes = trainer.episodes;
    c.steps_per_episode = trainer.steps_per_episode;
    if (trainer.buffer_capacity < 1) throw ConfigError("trainer.buffer_capacity must be >= 1");
    c.buffer_capacity = static_cast<std::size_t>(trainer.buffer_capacity);
    c.critic_hidden = trainer.critic_hidden;
    c.critic_final_scale = trainer.critic_final_scale;
    return c;
  }

  long total_steps() const { return run.steps > 0 ? run.steps : trainer.episodes * trainer.steps_per_episode; }

  void validate() const {
    if (run.policy != "snn" && run.policy != "mlp" && run.policy != "random")
      throw ConfigError("run.policy must be one of snn, mlp, random (got '" + run.policy + "')");
    if (run.steps < 0) throw ConfigError("run.steps must be nonnegative");
    if (run.checkpoint_every < 0) throw ConfigError("run.checkpoint_every must be nonnegative");
    if (run.eval_states < 1) throw ConfigError("run.eval_states must be >= 1");
    if (run.oracle_resolution < 2) throw ConfigError("run.oracle_resolution must be >= 2");
    if (run.jobs < 0) throw ConfigError("run.jobs must be nonnegative");
    if (run.out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
    try {
      env_config().validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    trainer_config().validate();
    snn.validate();
    for (int h : mlp.hidden)
      if (h < 1) throw ConfigError("mlp.hidden sizes must be >= 1");
  }
};

namespace detail {

using FieldRef = std::variant<double& (*)(RunConfig&), int& (*)(RunConfig&), long& (*)(RunConfig&),
                              bool& (*)(RunConfig&), std::uint64_t& (*)(RunConfig&),
                              std::string& (*)(RunConfig&), std::vector<int>& (*)(RunConfig&)>;

}  // namespace detail

struct ConfigField {
  const char* key;  // "section.name"
  detail::FieldRef ref;
  const char* doc;  // unit and meaning
};

#define AOLO_FIELD(type, section, name, doc) \
  ConfigField { #section "." #name, +[](RunConfig& c) -> type& { return c.section.name; }, doc }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields{
      AOLO_FIELD(std::uint64_t, run, seed, "training seed"),
      AOLO_FIELD(std::string, run, policy, "snn | mlp | random"),
      AOLO_FIELD(std::string, run, out_dir, "output root; AOLO_OUT_DIR overrides, --out-dir overrides both"),
      AOLO_FIELD(long, run, steps, "environment steps; 0 means episodes * steps_per_episode"),
      AOLO_FIELD(long, run, checkpoint_every, "steps between checkpoints; 0 disables periodic checkpoints"),
      AOLO_FIELD(int, run, eval_states, "held-out states for evaluation"),
      AOLO_FIELD(std::uint64_t, run, eval_seed, "seed of the held-out evaluation states"),
      AOLO_FIELD(int, run, oracle_resolution, "grid points per action axis for the brute-force oracle"),
      AOLO_FIELD(int, run, jobs, "concurrent sweep runs / oracle states; 0 means one per hardware thread"),

      AOLO_FIELD(double, env, m_min, "Nakagami shape m, lower bound"),
      AOLO_FIELD(double, env, m_max, "Nakagami shape m, upper bound"),
      AOLO_FIELD(double, env, omega_min, "Nakagami spread omega, lower bound"),
      AOLO_FIELD(double, env, omega_max, "Nakagami spread omega, upper bound"),
      AOLO_FIELD(double, env, bandwidth_min_mhz, "channel bandwidth lower bound, MHz"),
      AOLO_FIELD(double, env, bandwidth_max_mhz, "channel bandwidth upper bound, MHz"),
      AOLO_FIELD(double, env, zeta1_min, "data-center grid intensity lower bound, gCO2/kWh"),
      AOLO_FIELD(double, env, zeta1_max, "data-center grid intensity upper bound, gCO2/kWh"),
      AOLO_FIELD(double, env, zeta2_min, "base-station grid intensity lower bound, gCO2/kWh"),
      AOLO_FIELD(double, env, zeta2_max, "base-station grid intensity upper bound, gCO2/kWh"),
      AOLO_FIELD(double, env, noise_var_w, "receiver noise power, W"),
      AOLO_FIELD(double, env, epsilon, "outage probability, in (0,1)"),
      AOLO_FIELD(double, env, kappa_min, "smallest output word count"),
      AOLO_FIELD(double, env, kappa_max, "largest output word count"),
      AOLO_FIELD(double, env, p_min_w, "smallest transmit power, W"),
      AOLO_FIELD(double, env, p_max_w, "largest transmit power, W"),
      AOLO_FIELD(double, env, reward_scale, "reward per gram of CO2 (1000: reward in mg)"),
      AOLO_FIELD(double, env, penalty, "reward of an infeasible action"),

      AOLO_FIELD(double, inference, n_gpu, "GPUs serving one request"),
      AOLO_FIELD(double, inference, p_gpu_kw, "GPU thermal design power, kW"),
      AOLO_FIELD(double, inference, pue, "data-center power usage effectiveness"),
      AOLO_FIELD(double, inference, psi_oi_tflop, "compute per inference operation, TFLOP"),
      AOLO_FIELD(double, inference, psi_iw, "inference operations per output word"),
      AOLO_FIELD(double, inference, omega_pf_tflops, "peak GPU throughput, TFLOP/s"),
      AOLO_FIELD(double, inference, alpha, "word-count exponent of inference cost, in (0,1]"),
      AOLO_FIELD(double, inference, c_gpu_kg, "embodied carbon per GPU, kgCO2"),
      AOLO_FIELD(double, inference, t_dc_years, "GPU lifespan, years"),

      AOLO_FIELD(double, comm, beta_bits, "bits per output word"),
      AOLO_FIELD(double, comm, p_fixed_w, "base-station fixed power (baseband and cooling), W"),
      AOLO_FIELD(double, comm, k_rate_mbps, "base-station total throughput, Mbit/s"),
      AOLO_FIELD(double, comm, t_bs_years, "base-station lifespan, years"),
      AOLO_FIELD(double, comm, c_bs_kg, "base-station embodied carbon, kgCO2"),

      AOLO_FIELD(double, qoe, a, "QoE curve shape"),
      AOLO_FIELD(double, qoe, b, "QoE curve scale, words"),
      AOLO_FIELD(double, qoe, q_max, "QoE at the peak word count a*b"),

      AOLO_FIELD(double, constraints, q_th, "minimum QoE"),
      AOLO_FIELD(double, constraints, e_th, "energy proxy budget rho1*kappa + rho2*P"),
      AOLO_FIELD(double, constraints, rho1, "energy proxy weight per word"),
      AOLO_FIELD(double, constraints, rho2, "energy proxy weight per watt"),
      AOLO_FIELD(double, constraints, t_infer_th_s, "inference latency budget, s"),
      AOLO_FIELD(double, constraints, t_trans_th_ms, "average transmission latency budget, ms"),
      AOLO_FIELD(double, constraints, p_trans_max_w, "transmit power cap, W"),

      AOLO_FIELD(double, quadrature, rel_tol, "adaptive quadrature relative tolerance"),
      AOLO_FIELD(double, quadrature, abs_tol, "adaptive quadrature absolute tolerance"),
      AOLO_FIELD(int, quadrature, max_subdivisions, "adaptive quadrature subdivision budget"),

      AOLO_FIELD(double, trainer, lr_actor, "actor learning rate"),
      AOLO_FIELD(double, trainer, lr_critic, "critic learning rate"),
      AOLO_FIELD(double, trainer, discount, "discount factor, in [0,1)"),
      AOLO_FIELD(double, trainer, tau, "soft target update rate, in (0,1]"),
      AOLO_FIELD(int, trainer, batch, "minibatch size"),
      AOLO_FIELD(double, trainer, noise_sigma, "exploration noise std on normalized actions"),
      AOLO_FIELD(long, trainer, warmup, "uniform-random steps before updates start"),
      AOLO_FIELD(long, trainer, episodes, "episodes"),
      AOLO_FIELD(long, trainer, steps_per_episode, "steps per episode"),
      AOLO_FIELD(long, trainer, buffer_capacity, "replay buffer capacity"),
      AOLO_FIELD(std::vector<int>, trainer, critic_hidden, "critic hidden layer sizes, comma separated"),
      AOLO_FIELD(double, trainer, critic_final_scale, "uniform init bound of the critic output layer"),

      AOLO_FIELD(int, snn, t_snn, "spike timesteps per forward pass"),
      AOLO_FIELD(int, snn, encoder_dim, "encoder neurons per state component"),
      AOLO_FIELD(int, snn, decoder_dim, "output neurons per action component"),
      AOLO_FIELD(std::vector<int>, snn, hidden, "hidden LIF layer sizes, comma separated"),
      AOLO_FIELD(double, snn, d_c, "current decay, in [0,1)"),
      AOLO_FIELD(double, snn, d_v, "voltage decay, in [0,1)"),
      AOLO_FIELD(double, snn, v_th, "LIF firing threshold"),
      AOLO_FIELD(double, snn, encoder_v_th, "encoder IF firing threshold"),
      AOLO_FIELD(double, snn, window, "rectangular pseudo-gradient width"),
      AOLO_FIELD(double, snn, init_gain, "LIF weight init bound times sqrt(fan_in)"),
      AOLO_FIELD(double, snn, decoder_init, "decoder weight init bound times sqrt(decoder_dim)"),
      AOLO_FIELD(bool, snn, train_encoder, "train receptive-field centers and widths"),

      AOLO_FIELD(std::vector<int>, mlp, hidden, "MLP actor hidden layer sizes, comma separated"),
  };
  return fields;
}

#undef AOLO_FIELD

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  const std::string s = trim(text);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  return out;
}

}  // namespace detail

inline const ConfigField& find_config_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (key == f.key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const ConfigField& field = find_config_field(key);
  std::visit(
      [&](auto ref) {
        auto& slot = ref(config);
        using T = std::decay_t<decltype(slot)>;
        if constexpr (std::is_same_v<T, std::string>)
          slot = detail::trim(value);
        else if constexpr (std::is_same_v<T, bool>)
          slot = detail::parse_bool(key, value);
        else if constexpr (std::is_same_v<T, std::vector<int>>)
          slot = detail::parse_int_list(key, value);
        else
          slot = detail::parse_number<T>(key, value);
      },
      field.ref);
}

inline std::string get_config_value(const RunConfig& config, const std::string& key) {
  const ConfigField& field = find_config_field(key);
  RunConfig& mutable_config = const_cast<RunConfig&>(config);
  return std::visit(
      [&](auto ref) -> std::string {
        const auto& slot = ref(mutable_config);
        using T = std::decay_t<decltype(slot)>;
        if constexpr (std::is_same_v<T, std::string>)
          return slot;
        else if constexpr (std::is_same_v<T, bool>)
          return slot ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::vector<int>>)
          return fmt::format("{}", fmt::join(slot, ","));
        else
          return fmt::format("{}", slot);
      },
      field.ref);
}

/// Applies a "section.key=value" override.
inline void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  set_config_value(config, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Applies every key of an INI document on top of `config`.
inline void apply_ini(RunConfig& config, std::istream& in, const std::string& origin = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(origin + ": key '" + section + "' is outside any section");
    for (const auto& [name, value] : body) set_config_value(config, section + "." + name, value.data());
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  apply_ini(base, in, path);
  return base;
}

/// INI text with every field, documented; reading it back reproduces `config`.
inline std::string dump_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : config_fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += fmt::format("; {}\n{} = {}\n", f.doc, key.substr(dot + 1), get_config_value(config, key));
  }
  return out;
}

}  // namespace aolo
