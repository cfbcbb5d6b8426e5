#pragma once

// Contextual MDP over the carbon model: state sampling, constraint checks,
// penalized reward and a brute-force grid oracle.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "aolo/carbon.hpp"
#include "aolo/channel.hpp"
#include "aolo/errors.hpp"
#include "aolo/rng.hpp"

namespace aolo {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
  /// Maps [lo, hi] onto [0, 1]; a degenerate range maps to 0.5.
  double normalize(double x) const { return hi == lo ? 0.5 : (x - lo) / (hi - lo); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct StateRanges {
  Range m{2.0, 12.0};
  Range omega{0.1, 10.0};
  Range bandwidth{15e6, 25e6};   // Hz
  Range zeta1{50.0, 150.0};      // gCO2/kWh
  Range zeta2{400.0, 900.0};     // gCO2/kWh

  void validate() const {
    for (const Range* r : {&m, &omega, &bandwidth, &zeta1, &zeta2})
      if (!(r->lo <= r->hi)) throw ConfigError("state range with lo > hi");
    if (!(m.lo >= 0.5)) throw ConfigError("state range: m must be >= 0.5");
    if (!(omega.lo > 0.0 && bandwidth.lo > 0.0 && zeta1.lo > 0.0 && zeta2.lo > 0.0))
      throw ConfigError("state range: omega, bandwidth and intensities must be positive");
  }
};

struct State {
  double m = 7.0;
  double omega = 5.0;
  double bandwidth = 20e6;   // Hz
  double zeta1 = 100.0;      // gCO2/kWh
  double zeta2 = 650.0;      // gCO2/kWh

  static constexpr int kDim = 5;

  std::array<double, kDim> normalized(const StateRanges& r) const {
    return {r.m.normalize(m), r.omega.normalize(omega), r.bandwidth.normalize(bandwidth),
            r.zeta1.normalize(zeta1), r.zeta2.normalize(zeta2)};
  }

  bool operator==(const State&) const = default;
};

struct ActionBox {
  double kappa_min = 1.0;
  double kappa_max = 1000.0;
  double p_min = 0.1;   // W
  double p_max = 60.0;  // W

  void validate() const {
    if (!(kappa_min >= 0.0 && kappa_min <= kappa_max)) throw ConfigError("action box: bad kappa bounds");
    if (!(p_min > 0.0 && p_min <= p_max)) throw ConfigError("action box: bad power bounds");
  }
};

struct Action {
  double kappa = 0.0;
  double p_trans = 0.0;
  bool operator==(const Action&) const = default;
};

/// Normalized action in [-1, 1]^2.
using RawAction = std::array<double, 2>;

struct EnvConfig {
  StateRanges ranges;
  ActionBox box;
  double noise_var = 1.0;  // W
  double epsilon = 0.1;
  InferenceProfile inference;
  CommProfile comm;
  QoEModel qoe;
  ConstraintSet constraints;
  QuadratureSpec quadrature;
  double reward_scale = 1000.0;   // g -> mg
  double penalty = -100.0;

  void validate() const {
    ranges.validate();
    box.validate();
    if (!(noise_var > 0.0)) throw ConfigError("noise_var must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    inference.validate();
    comm.validate();
    qoe.validate();
    constraints.validate();
    quadrature.validate();
  }
};

enum class Constraint { qoe, energy, t_infer, t_trans, p_max };

inline const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::qoe: return "qoe";
    case Constraint::energy: return "energy";
    case Constraint::t_infer: return "t_infer";
    case Constraint::t_trans: return "t_trans";
    case Constraint::p_max: return "p_max";
  }
  return "?";
}

struct EvalReport {
  bool feasible = false;
  double carbon_total = 0.0;  // g
  double carbon_infer = 0.0;  // g
  double carbon_comm = 0.0;   // g
  double qoe = 0.0;
  double energy = 0.0;
  double t_infer = 0.0;       // s
  double t_trans_avg = 0.0;   // s
  double gamma_th = 0.0;
  std::vector<Constraint> violated;

  bool operator==(const EvalReport&) const = default;
};

struct Transition {
  State state;
  RawAction raw_action{};
  Action action;
  double reward = 0.0;
  State next_state;
  EvalReport report;
};

inline State sample_state(const StateRanges& ranges, Rng& rng) {
  State s;
  s.m = ranges.m.sample(rng);
  s.omega = ranges.omega.sample(rng);
  s.bandwidth = ranges.bandwidth.sample(rng);
  s.zeta1 = ranges.zeta1.sample(rng);
  s.zeta2 = ranges.zeta2.sample(rng);
  return s;
}

inline ChannelParams channel_of(const State& s, const EnvConfig& cfg) {
  return {s.m, s.omega, cfg.noise_var, s.bandwidth};
}

/// The κ-independent part of an evaluation at one transmit power.
struct LinkSummary {
  LinkBudget budget;
  double mean_inverse_rate = 0.0;  // E[1/log2(1+γ) | γ >= γ_th]
};

inline LinkSummary link_summary(const State& s, double p_trans, const EnvConfig& cfg) {
  const ChannelParams ch = channel_of(s, cfg);
  LinkSummary out;
  out.budget = make_link_budget(ch, p_trans, cfg.epsilon);
  out.mean_inverse_rate = mean_inverse_rate(ch, out.budget, cfg.quadrature);
  return out;
}

/// Evaluation with a precomputed link summary for action.p_trans.
inline EvalReport evaluate_with_link(const State& s, const Action& a, const LinkSummary& link,
                                     const EnvConfig& cfg) {
  EvalReport r;
  const double zeta1 = per_joule(s.zeta1);
  const double zeta2 = per_joule(s.zeta2);
  r.gamma_th = link.budget.gamma_th;
  r.t_infer = inference_time(cfg.inference, a.kappa);
  r.carbon_infer = inference_carbon(cfg.inference, zeta1, a.kappa);
  r.t_trans_avg = a.kappa * cfg.comm.beta / s.bandwidth * link.mean_inverse_rate;
  r.carbon_comm = zeta2 * a.p_trans * r.t_trans_avg + comm_fixed_carbon(cfg.comm, zeta2, a.kappa);
  r.carbon_total = r.carbon_infer + r.carbon_comm;
  r.qoe = qoe(cfg.qoe, a.kappa);
  r.energy = energy_proxy(cfg.constraints, a.kappa, a.p_trans);

  const ConstraintSet& c = cfg.constraints;
  if (!(r.qoe >= c.q_th)) r.violated.push_back(Constraint::qoe);
  if (!(r.energy <= c.e_th)) r.violated.push_back(Constraint::energy);
  if (!(r.t_infer <= c.t_infer_th)) r.violated.push_back(Constraint::t_infer);
  if (!(r.t_trans_avg <= c.t_trans_th)) r.violated.push_back(Constraint::t_trans);
  if (!(a.p_trans <= c.p_trans_max)) r.violated.push_back(Constraint::p_max);
  r.feasible = r.violated.empty();
  return r;
}

inline EvalReport evaluate(const State& s, const Action& a, const EnvConfig& cfg) {
  if (!(a.kappa >= 0.0)) throw DomainError("evaluate: kappa must be nonnegative");
  if (!(a.p_trans > 0.0)) throw DomainError("evaluate: p_trans must be positive");
  return evaluate_with_link(s, a, link_summary(s, a.p_trans, cfg), cfg);
}

/// Negated total carbon in mg when feasible, the penalty otherwise.
inline double reward(const EvalReport& report, const EnvConfig& cfg = {}) {
  return report.feasible ? -cfg.reward_scale * report.carbon_total : cfg.penalty;
}

/// Affine map from [-1,1]^2 to the action box; κ rounded to whole words.
inline Action to_action(const RawAction& raw, const ActionBox& box) {
  auto affine = [](double x, double lo, double hi) {
    const double clipped = std::min(1.0, std::max(-1.0, x));
    return lo + 0.5 * (clipped + 1.0) * (hi - lo);
  };
  return {std::round(affine(raw[0], box.kappa_min, box.kappa_max)), affine(raw[1], box.p_min, box.p_max)};
}

/// Applies a normalized action and draws the next state i.i.d.
inline Transition step(const State& s, const RawAction& raw, const EnvConfig& cfg, Rng& rng) {
  Transition t;
  t.state = s;
  t.raw_action = raw;
  t.action = to_action(raw, cfg.box);
  t.report = evaluate(s, t.action, cfg);
  t.reward = reward(t.report, cfg);
  t.next_state = sample_state(cfg.ranges, rng);
  return t;
}

struct OracleResult {
  Action action;
  double reward = 0.0;
  EvalReport report;
};

inline double grid_point(int i, int resolution, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

/// Exhaustive search over a resolution x resolution grid of the action box.
/// Ties go to the smaller κ grid value, then the smaller power.
inline OracleResult grid_oracle(const State& s, int resolution, const EnvConfig& cfg) {
  if (resolution < 2) throw DomainError("grid_oracle: resolution must be >= 2");
  const ActionBox& box = cfg.box;
  OracleResult best;
  int best_i = -1, best_j = -1;
  for (int j = 0; j < resolution; ++j) {
    const double p = grid_point(j, resolution, box.p_min, box.p_max);
    const LinkSummary link = link_summary(s, p, cfg);
    for (int i = 0; i < resolution; ++i) {
      const Action a{std::round(grid_point(i, resolution, box.kappa_min, box.kappa_max)), p};
      EvalReport rep = evaluate_with_link(s, a, link, cfg);
      const double r = reward(rep, cfg);
      const bool better = best_i < 0 || r > best.reward ||
                          (r == best.reward && (i < best_i || (i == best_i && j < best_j)));
      if (better) {
        best = {a, r, std::move(rep)};
        best_i = i;
        best_j = j;
      }
    }
  }
  return best;
}

}  // namespace aolo
