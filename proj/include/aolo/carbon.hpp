#pragma once

// Per-request carbon footprint of LLM inference plus wireless delivery.
// Units inside this header: seconds, watts, joules, grams CO2, bits.

#include <cmath>

#include "aolo/channel.hpp"
#include "aolo/errors.hpp"
#include "aolo/numerics.hpp"

namespace aolo {

constexpr double kJoulesPerKwh = 3.6e6;
constexpr double kSecondsPerYear = 365.0 * 86400.0;

/// gCO2/kWh -> gCO2/J.
constexpr double per_joule(double grams_per_kwh) { return grams_per_kwh / kJoulesPerKwh; }

struct InferenceProfile {
  double n_gpu = 8.0;
  double p_gpu = 428.0;              // W, thermal design power per GPU
  double pue = 1.58;
  double psi_oi = 0.35e12;           // FLOP per inference operation
  double psi_iw = 5.0;               // inference operations per output word
  double omega_pf = 156e12;          // peak FLOP/s per GPU
  double alpha = 0.8;
  double c_gpu_emb = 318e3;          // g per GPU
  double t_dc = 3.0 * kSecondsPerYear;

  /// GPU-seconds per output word.
  double gpu_seconds_per_word() const { return psi_oi * psi_iw / omega_pf; }

  void validate() const {
    if (!(n_gpu > 0 && p_gpu > 0 && pue > 0 && psi_oi > 0 && psi_iw > 0 && omega_pf > 0 &&
          c_gpu_emb > 0 && t_dc > 0))
      throw DomainError("InferenceProfile: all fields must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("InferenceProfile: alpha must lie in (0,1]");
  }
};

struct CommProfile {
  double beta = 50.0;                // bits per word
  double p_fixed = 600.0;            // W, BBU + cooling
  double k_rate = 1e9;               // bit/s total BS throughput
  double t_bs = 10.0 * kSecondsPerYear;
  double c_bs_emb = 6500e3;          // g

  void validate() const {
    if (!(beta > 0 && p_fixed > 0 && k_rate > 0 && t_bs > 0 && c_bs_emb > 0))
      throw DomainError("CommProfile: all fields must be positive");
  }
};

/// Grid carbon intensities, stored per joule.
struct CarbonIntensities {
  double zeta1 = per_joule(100.0);
  double zeta2 = per_joule(650.0);

  static CarbonIntensities from_kwh(double zeta1_kwh, double zeta2_kwh) {
    if (!(zeta1_kwh > 0.0 && zeta2_kwh > 0.0)) throw DomainError("carbon intensities must be positive");
    return {per_joule(zeta1_kwh), per_joule(zeta2_kwh)};
  }
};

/// Gamma-profile QoE curve: zero at κ=0, peak q_max at κ = a·b.
struct QoEModel {
  double a = 2.0;
  double b = 40.0;
  double q_max = 10.0;

  void validate() const {
    if (!(a > 0.0 && b > 0.0 && q_max > 0.0)) throw DomainError("QoEModel: a, b, q_max must be positive");
  }
};

struct ConstraintSet {
  double q_th = 7.0;
  double e_th = 1600.0;
  double rho1 = 1.0;
  double rho2 = 10.0;
  double t_infer_th = 0.3;           // s
  double t_trans_th = 0.5e-3;        // s
  double p_trans_max = 60.0;         // W

  void validate() const {
    if (!(q_th > 0 && e_th > 0 && rho1 > 0 && rho2 > 0 && t_infer_th > 0 && t_trans_th > 0 &&
          p_trans_max > 0))
      throw DomainError("ConstraintSet: all fields must be positive");
  }
};

namespace detail {
inline void check_kappa(double kappa) {
  if (!(kappa >= 0.0)) throw DomainError("output word count must be nonnegative");
}
}  // namespace detail

inline double inference_time(const InferenceProfile& profile, double kappa) {
  detail::check_kappa(kappa);
  return profile.gpu_seconds_per_word() / profile.n_gpu * std::pow(kappa, profile.alpha);
}

/// Operational plus embodied carbon of generating κ words, zeta1 in g/J.
inline double inference_carbon(const InferenceProfile& profile, double zeta1, double kappa) {
  detail::check_kappa(kappa);
  const double gpu_seconds = std::pow(kappa, profile.alpha) * profile.gpu_seconds_per_word();
  return gpu_seconds * profile.p_gpu * profile.pue * zeta1 + gpu_seconds * profile.c_gpu_emb / profile.t_dc;
}

/// Shannon-rate transmission time of κ words at SNR γ.
inline double trans_time(const CommProfile& comm, const ChannelParams& channel, double kappa, double gamma) {
  detail::check_kappa(kappa);
  if (!(gamma > 0.0)) throw DomainError("trans_time: gamma must be positive");
  return kappa * comm.beta / (channel.bandwidth * std::log2(1.0 + gamma));
}

/// BS fixed-power and embodied share of κ words; independent of SNR and P_trans.
inline double comm_fixed_carbon(const CommProfile& comm, double zeta2, double kappa) {
  detail::check_kappa(kappa);
  return kappa * comm.beta * (zeta2 * comm.p_fixed * comm.t_bs + comm.c_bs_emb) / (comm.k_rate * comm.t_bs);
}

inline double comm_carbon_instant(const CommProfile& comm, const ChannelParams& channel, double zeta2,
                                  double kappa, double p_trans, double gamma) {
  if (!(p_trans > 0.0)) throw DomainError("comm_carbon_instant: p_trans must be positive");
  return zeta2 * p_trans * trans_time(comm, channel, kappa, gamma) + comm_fixed_carbon(comm, zeta2, kappa);
}

/// E[1/log2(1+γ) | γ >= γ_th]; the κ-independent factor of the average transmission time.
inline double mean_inverse_rate(const ChannelParams& channel, const LinkBudget& budget,
                                const QuadratureSpec& spec = {}) {
  return conditional_expectation(
      channel, budget, [](double gamma) { return 1.0 / std::log2(1.0 + gamma); }, spec);
}

inline double avg_trans_time(const CommProfile& comm, const ChannelParams& channel, const LinkBudget& budget,
                             double kappa, const QuadratureSpec& spec = {}) {
  detail::check_kappa(kappa);
  return kappa * comm.beta / channel.bandwidth * mean_inverse_rate(channel, budget, spec);
}

/// Outage-conditioned communication carbon, (1/(1-ε)) ∫_{γ_th}^∞ C_C(γ) f(γ) dγ.
/// The conditional density integrates to one, so the SNR-independent fixed
/// term passes through unscaled.
inline double avg_comm_carbon(const CommProfile& comm, const ChannelParams& channel, const LinkBudget& budget,
                              double zeta2, double kappa, const QuadratureSpec& spec = {}) {
  return zeta2 * budget.p_trans * avg_trans_time(comm, channel, budget, kappa, spec) +
         comm_fixed_carbon(comm, zeta2, kappa);
}

inline double qoe(const QoEModel& model, double kappa) {
  detail::check_kappa(kappa);
  if (kappa == 0.0) return 0.0;
  const double peak = model.a * model.b;
  return model.q_max * std::pow(kappa / peak, model.a) * std::exp(model.a - kappa / model.b);
}

inline double energy_proxy(const ConstraintSet& constraints, double kappa, double p_trans) {
  return constraints.rho1 * kappa + constraints.rho2 * p_trans;
}

}  // namespace aolo
