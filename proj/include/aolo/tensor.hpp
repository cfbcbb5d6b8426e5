#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "aolo/errors.hpp"
#include "aolo/rng.hpp"

namespace aolo {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Flat list of parameter tensors; gradients and optimizer moments mirror it.
template <typename S>
using ParamList = std::vector<Mat<S>>;

template <typename S>
ParamList<S> zeros_like(const ParamList<S>& params) {
  ParamList<S> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Mat<S>::Zero(p.rows(), p.cols()));
  return out;
}

template <typename S>
void fill_uniform(Mat<S>& m, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
}

template <typename S>
void check_same_shapes(const ParamList<S>& a, const ParamList<S>& b, const char* who) {
  if (a.size() != b.size()) throw DimensionError(std::string(who) + ": tensor count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols())
      throw DimensionError(std::string(who) + ": shape mismatch at tensor " + std::to_string(i));
}

/// target <- tau * online + (1 - tau) * target, tensor by tensor.
template <typename S>
void soft_update(const ParamList<S>& online, ParamList<S>& target, double tau) {
  check_same_shapes(online, target, "soft_update");
  const S t = static_cast<S>(tau);
  for (std::size_t i = 0; i < online.size(); ++i) {
    if (tau == 1.0)
      target[i] = online[i];
    else
      target[i] = t * online[i] + (S(1) - t) * target[i];
  }
}

template <typename S>
bool all_finite(const ParamList<S>& params) {
  for (const auto& p : params)
    if (!p.allFinite()) return false;
  return true;
}

}  // namespace aolo
