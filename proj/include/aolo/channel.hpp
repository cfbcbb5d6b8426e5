#pragma once

// Nakagami-m fading SNR model with outage.
//
// The instantaneous SNR is γ = P·X/σ² with channel power gain X ~ Gamma(m, Ω/m).
// Everything below works in the normalized variable u = γ/θ, θ = ΩP/(mσ²),
// which is Gamma(m, 1) distributed, so CDFs reduce to regularized incomplete
// gamma functions and quadrature runs on a unit scale.

#include <cmath>
#include <cstddef>
#include <string>

#include "aolo/errors.hpp"
#include "aolo/numerics.hpp"
#include "aolo/rng.hpp"

namespace aolo {

struct ChannelParams {
  double m = 2.0;
  double omega = 1.0;
  double noise_var = 1.0;    // W
  double bandwidth = 20e6;   // Hz

  void validate() const {
    if (!(m >= 0.5)) throw DomainError("ChannelParams: m must be >= 0.5");
    if (!(omega > 0.0)) throw DomainError("ChannelParams: omega must be positive");
    if (!(noise_var > 0.0)) throw DomainError("ChannelParams: noise_var must be positive");
    if (!(bandwidth > 0.0)) throw DomainError("ChannelParams: bandwidth must be positive");
  }
};

struct LinkBudget {
  double p_trans = 1.0;  // W
  double epsilon = 0.1;
  double gamma_th = 0.0;
};

/// θ = ΩP/(mσ²), the scale of the SNR distribution.
inline double snr_scale(const ChannelParams& params, double p_trans) {
  return params.omega * p_trans / (params.m * params.noise_var);
}

namespace detail {

// Gamma(m, 1) density.
inline double unit_gamma_pdf(double m, double u) {
  if (u == 0.0) {
    if (m == 1.0) return 1.0;
    return m > 1.0 ? 0.0 : INFINITY;
  }
  return std::exp((m - 1.0) * std::log(u) - u - std::lgamma(m));
}

inline void check_power(double p_trans) {
  if (!(p_trans > 0.0)) throw DomainError("transmit power must be positive");
}

}  // namespace detail

inline double snr_pdf(const ChannelParams& params, double p_trans, double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("snr_pdf: gamma must be nonnegative");
  detail::check_power(p_trans);
  const double theta = snr_scale(params, p_trans);
  return detail::unit_gamma_pdf(params.m, gamma / theta) / theta;
}

inline double snr_cdf(const ChannelParams& params, double p_trans, double gamma) {
  if (!(gamma >= 0.0)) throw DomainError("snr_cdf: gamma must be nonnegative");
  detail::check_power(p_trans);
  return reg_lower_gamma(params.m, gamma / snr_scale(params, p_trans));
}

inline double outage_probability(const ChannelParams& params, const LinkBudget& budget) {
  return snr_cdf(params, budget.p_trans, budget.gamma_th);
}

/// γ_th with F(γ_th) = ε. The normalized threshold depends only on (m, ε).
inline double solve_gamma_th(const ChannelParams& params, double p_trans, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("solve_gamma_th: epsilon must lie in (0,1)");
  detail::check_power(p_trans);
  const double m = params.m;
  auto excess = [&](double u) { return reg_lower_gamma(m, u) - epsilon; };
  double hi = m + 10.0 * std::sqrt(m) + 10.0;
  while (excess(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw ConvergenceError("solve_gamma_th: could not bracket threshold");
  }
  // The bracket-width criterion is relative, so shrink until F is pinned to ~1e-14.
  const double u_th = find_root(excess, 0.0, hi, 1e-15);
  return u_th * snr_scale(params, p_trans);
}

inline LinkBudget make_link_budget(const ChannelParams& params, double p_trans, double epsilon) {
  return {p_trans, epsilon, solve_gamma_th(params, p_trans, epsilon)};
}

/// Unconditional SNR draw γ = P·X/σ².
inline double sample_snr(const ChannelParams& params, double p_trans, Rng& rng) {
  return p_trans * sample_gamma(params.m, params.omega / params.m, rng) / params.noise_var;
}

/// SNR draw conditioned on γ >= γ_th, by rejection. `proposals`, when given,
/// accumulates the number of unconditional draws consumed.
inline double sample_snr_conditional(const ChannelParams& params, const LinkBudget& budget, Rng& rng,
                                     std::size_t* proposals = nullptr) {
  for (;;) {
    const double gamma = sample_snr(params, budget.p_trans, rng);
    if (proposals) ++*proposals;
    if (gamma >= budget.gamma_th) return gamma;
  }
}

/// (1/(1-ε)) ∫_{γ_th}^∞ g(γ) f(γ) dγ.
template <typename G>
double conditional_expectation(const ChannelParams& params, const LinkBudget& budget, G&& g,
                               const QuadratureSpec& spec = {}) {
  const double theta = snr_scale(params, budget.p_trans);
  const double m = params.m;
  auto integrand = [&](double u) {
    const double density = detail::unit_gamma_pdf(m, u);
    if (density == 0.0) return 0.0;
    return g(theta * u) * density;
  };
  return integrate_semi_infinite(integrand, budget.gamma_th / theta, spec) / (1.0 - budget.epsilon);
}

}  // namespace aolo
