#pragma once

// Special functions, root finding, adaptive quadrature and gamma variates.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "aolo/errors.hpp"
#include "aolo/rng.hpp"

namespace aolo {

struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 200;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || max_subdivisions < 1)
      throw DomainError("QuadratureSpec: tolerances must be positive and max_subdivisions >= 1");
  }
};

inline double ln_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("ln_gamma: x must be positive");
  return std::lgamma(x);
}

namespace detail {

constexpr int kGammaMaxIter = 2000;
constexpr double kGammaEps = 1e-16;

// Lower regularized P(a,x) by power series; valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kGammaMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw ConvergenceError("incomplete gamma series did not converge");
}

// Upper regularized Q(a,x) by modified Lentz continued fraction; valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps)
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw ConvergenceError("incomplete gamma continued fraction did not converge");
}

inline void check_gamma_args(double a, double x, const char* who) {
  if (!(a > 0.0)) throw DomainError(std::string(who) + ": a must be positive");
  if (!(x >= 0.0)) throw DomainError(std::string(who) + ": x must be nonnegative");
}

}  // namespace detail

/// Q(a,x) = Γ(a,x)/Γ(a). Series for x < a+1, continued fraction otherwise.
inline double reg_upper_gamma(double a, double x) {
  detail::check_gamma_args(a, x, "reg_upper_gamma");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

/// P(a,x) = 1 - Q(a,x), computed without cancellation on the series side.
inline double reg_lower_gamma(double a, double x) {
  detail::check_gamma_args(a, x, "reg_lower_gamma");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Brent's method on a sign-changing bracket. Stops when |f(x)| <= tol or the
/// bracket has shrunk below tol * max(1, |x|).
template <std::invocable<double> F>
double find_root(F&& f, double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw DomainError("find_root: tol must be positive");
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) throw BracketError("find_root: f(lo) and f(hi) have the same sign");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 1000; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double width = std::abs(c - b);
    if (std::abs(fb) <= tol || width <= tol * std::max(1.0, std::abs(b))) return b;

    const double half = 0.5 * (c - b);
    const double min_step = 0.25 * tol * std::max(1.0, std::abs(b)) +
                            2.0 * std::numeric_limits<double>::epsilon() * std::abs(b);
    if (std::abs(e) >= min_step && std::abs(fa) > std::abs(fb)) {
      // Inverse quadratic interpolation, or secant when only two points differ.
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * half * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * half * q - std::abs(min_step * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = half;
        e = d;
      }
    } else {
      d = half;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > min_step ? d : (half > 0.0 ? min_step : -min_step);
    fb = f(b);
  }
  throw ConvergenceError("find_root: iteration limit reached");
}

namespace detail {

struct GaussKronrod15 {
  static constexpr std::array<double, 8> nodes{
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> kronrod{
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  // Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
  static constexpr std::array<double, 4> gauss{
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
};

struct Segment {
  double lo, hi, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename G>
Segment gk15(G& g, double lo, double hi) {
  using GK = GaussKronrod15;
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = g(center);
  double kronrod = fc * GK::kronrod[7];
  double gauss = fc * GK::gauss[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * GK::nodes[j];
    const double pair = g(center - dx) + g(center + dx);
    kronrod += GK::kronrod[j] * pair;
    if (j % 2 == 1) gauss += GK::gauss[j / 2] * pair;
  }
  return {lo, hi, kronrod * half, std::abs((kronrod - gauss) * half)};
}

// Globally adaptive bisection on [lo, hi] driven by the largest local error.
template <typename G>
double adaptive_gk15(G&& g, double lo, double hi, const QuadratureSpec& spec) {
  spec.validate();
  std::priority_queue<Segment> pending;
  Segment first = gk15(g, lo, hi);
  double total = first.value;
  double error = first.error;
  pending.push(first);
  int subdivisions = 1;
  while (error > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    if (subdivisions >= spec.max_subdivisions)
      throw ConvergenceError("quadrature: max_subdivisions exhausted (error estimate " +
                             std::to_string(error) + ")");
    const Segment worst = pending.top();
    pending.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Segment left = gk15(g, worst.lo, mid);
    const Segment right = gk15(g, mid, worst.hi);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    pending.push(left);
    pending.push(right);
    ++subdivisions;
  }
  // Re-sum to shed the drift of incremental updates.
  total = 0.0;
  while (!pending.empty()) {
    total += pending.top().value;
    pending.pop();
  }
  return total;
}

}  // namespace detail

/// ∫_lo^hi g(x) dx by adaptive Gauss–Kronrod.
template <std::invocable<double> G>
double integrate(G&& g, double lo, double hi, const QuadratureSpec& spec = {}) {
  if (hi == lo) return 0.0;
  if (hi < lo) return -integrate(g, hi, lo, spec);
  return detail::adaptive_gk15(g, lo, hi, spec);
}

/// ∫_lower^∞ g(x) dx via x = lower + t/(1-t) on t ∈ [0,1).
template <std::invocable<double> G>
double integrate_semi_infinite(G&& g, double lower, const QuadratureSpec& spec = {}) {
  auto mapped = [&](double t) {
    const double one_minus = 1.0 - t;
    const double x = lower + t / one_minus;
    const double value = g(x);
    if (value == 0.0) return 0.0;
    return value / (one_minus * one_minus);
  };
  return detail::adaptive_gk15(mapped, 0.0, 1.0, spec);
}

/// Gamma(shape, scale) variate. Marsaglia–Tsang squeeze/rejection for shape >= 1,
/// boosted by U^{1/shape} below that.
inline double sample_gamma(double shape, double scale, Rng& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DomainError("sample_gamma: shape and scale must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(shape + 1.0, scale, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

}  // namespace aolo
