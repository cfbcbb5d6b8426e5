#pragma once

// Central finite-difference checks against hand-rolled gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "aolo/rng.hpp"
#include "aolo/tensor.hpp"

namespace aolo::testing {

struct GradCheckResult {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `grads` with central differences of `loss` over every entry of
/// `params` (or a random sample of `max_entries` of them). `admissible`, when
/// given, can veto an entry, e.g. when the perturbation crosses a kink.
inline GradCheckResult check_gradients(ParamList<double>& params, const ParamList<double>& grads,
                                       const std::function<double()>& loss, double step = 1e-5,
                                       std::size_t max_entries = 0, std::uint64_t seed = 1,
                                       const std::function<bool()>& admissible = {}) {
  struct Entry {
    std::size_t tensor;
    Eigen::Index index;
  };
  std::vector<Entry> entries;
  for (std::size_t t = 0; t < params.size(); ++t)
    for (Eigen::Index i = 0; i < params[t].size(); ++i) entries.push_back({t, i});
  if (max_entries && entries.size() > max_entries) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_entries; ++i) std::swap(entries[i], entries[i + rng.below(entries.size() - i)]);
    entries.resize(max_entries);
  }
  GradCheckResult out;
  for (const Entry& e : entries) {
    double& x = params[e.tensor].data()[e.index];
    const double saved = x;
    x = saved + step;
    const double up = loss();
    const bool up_ok = !admissible || admissible();
    x = saved - step;
    const double down = loss();
    const bool down_ok = !admissible || admissible();
    x = saved;
    if (!up_ok || !down_ok) {
      ++out.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = grads[e.tensor].data()[e.index];
    out.worst = std::max(out.worst, relative_error(analytic, numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace aolo::testing
