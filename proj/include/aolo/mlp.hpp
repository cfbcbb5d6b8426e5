#pragma once

// Dense networks with hand-rolled reverse mode, the double critic and Adam.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aolo/errors.hpp"
#include "aolo/rng.hpp"
#include "aolo/tensor.hpp"

namespace aolo {

enum class Activation { mish, identity, tanh };

// mish(x) = x tanh(softplus(x)). With n = e^x, tanh(log(1 + n)) = w / (w + 2)
// where w = n (n + 2), which needs a single exponential.
inline double mish(double x) {
  if (x > 20.0) return x;
  const double n = std::exp(x);
  const double w = n * (n + 2.0);
  return x * w / (w + 2.0);
}

inline double mish_grad(double x) {
  if (x > 20.0) return 1.0;
  const double n = std::exp(x);
  const double w = n * (n + 2.0);
  const double d = w + 2.0;
  return w / d + 4.0 * x * n * (n + 1.0) / (d * d);
}

namespace detail {

template <typename S>
void apply_activation(Activation act, const Mat<S>& pre, Mat<S>& out) {
  if (act == Activation::identity) {
    out = pre;
    return;
  }
  if (act == Activation::tanh) {
    out = pre.array().tanh().matrix();
    return;
  }
  using Arr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;
  const auto x = pre.array();
  const Arr n = x.min(S(20)).exp();
  const Arr w = n * (n + S(2));
  out = (x > S(20)).select(x, x * w / (w + S(2))).matrix();
}

template <typename S>
void apply_activation_grad(Activation act, const Mat<S>& pre, Mat<S>& grad) {
  if (act == Activation::identity) return;
  if (act == Activation::tanh) {
    grad.array() *= S(1) - pre.array().tanh().square();
    return;
  }
  using Arr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;
  const auto x = pre.array();
  const Arr n = x.min(S(20)).exp();
  const Arr w = n * (n + S(2));
  const Arr d = w + S(2);
  grad.array() *= (x > S(20)).select(S(1), w / d + S(4) * x * n * (n + S(1)) / d.square());
}

}  // namespace detail

/// Fully connected chain. Parameters are stored as [W0, b0, W1, b1, ...]
/// with W of shape (out x in) and b of shape (out x 1); inputs are column batches.
template <typename S>
class DenseNet {
 public:
  struct Trace {
    std::vector<Mat<S>> inputs;  // input to each layer
    std::vector<Mat<S>> pre;     // pre-activation of each layer
  };

  DenseNet() = default;

  /// sizes = {in, hidden..., out}. Hidden layers use `hidden`, the last layer `output`.
  /// Weights and biases ~ U(±1/sqrt(fan_in)); the final layer uses U(±final_scale)
  /// when final_scale > 0.
  DenseNet(const std::vector<int>& sizes, Activation hidden, Activation output, Rng& rng,
           double final_scale = 0.0)
      : sizes_(sizes) {
    if (sizes.size() < 2) throw DimensionError("DenseNet: need at least input and output sizes");
    const std::size_t layers = sizes.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw DimensionError("DenseNet: sizes must be positive");
      activations_.push_back(l + 1 == layers ? output : hidden);
      Mat<S> w(sizes[l + 1], sizes[l]);
      Mat<S> b(sizes[l + 1], 1);
      const bool last = l + 1 == layers;
      const double bound = last && final_scale > 0.0 ? final_scale : 1.0 / std::sqrt(double(sizes[l]));
      fill_uniform(w, bound, rng);
      fill_uniform(b, bound, rng);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return activations_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }

  ParamList<S>& params() { return params_; }
  const ParamList<S>& params() const { return params_; }

  std::vector<std::string> param_names(const std::string& prefix) const {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      names.push_back(prefix + "layer" + std::to_string(l) + ".weight");
      names.push_back(prefix + "layer" + std::to_string(l) + ".bias");
    }
    return names;
  }

  Mat<S> forward(const Mat<S>& x) const {
    check_input(x);
    Mat<S> h = x, pre;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      pre.noalias() = weight(l) * h;
      pre.colwise() += bias(l).col(0);
      detail::apply_activation(activations_[l], pre, h);
    }
    return h;
  }

  Mat<S> forward(const Mat<S>& x, Trace& trace) const {
    check_input(x);
    trace.inputs.assign(num_layers(), {});
    trace.pre.assign(num_layers(), {});
    Mat<S> h = x;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      trace.inputs[l] = h;
      Mat<S>& pre = trace.pre[l];
      pre.noalias() = weight(l) * h;
      pre.colwise() += bias(l).col(0);
      detail::apply_activation(activations_[l], pre, h);
    }
    return h;
  }

  /// Returns dL/dx. Parameter gradients are written to *grads when non-null
  /// (overwritten, not accumulated).
  Mat<S> backward(const Trace& trace, const Mat<S>& grad_out, ParamList<S>* grads) const {
    if (trace.pre.size() != num_layers()) throw DimensionError("DenseNet::backward: missing trace");
    if (grad_out.rows() != output_dim() || grad_out.cols() != trace.pre.back().cols())
      throw DimensionError("DenseNet::backward: grad_out shape mismatch");
    if (grads) *grads = zeros_like(params_);
    Mat<S> g = grad_out;
    for (std::size_t l = num_layers(); l-- > 0;) {
      detail::apply_activation_grad(activations_[l], trace.pre[l], g);
      if (grads) {
        (*grads)[2 * l].noalias() = g * trace.inputs[l].transpose();
        (*grads)[2 * l + 1] = g.rowwise().sum();
      }
      Mat<S> below;
      below.noalias() = weight(l).transpose() * g;
      g = std::move(below);
    }
    return g;
  }

 private:
  const Mat<S>& weight(std::size_t l) const { return params_[2 * l]; }
  const Mat<S>& bias(std::size_t l) const { return params_[2 * l + 1]; }

  void check_input(const Mat<S>& x) const {
    if (x.rows() != input_dim())
      throw DimensionError("DenseNet: input has " + std::to_string(x.rows()) + " rows, expected " +
                           std::to_string(input_dim()));
  }

  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  ParamList<S> params_;
};

/// Two independently initialized Q-networks over [state; action] columns.
template <typename S>
struct DoubleCritic {
  DenseNet<S> q1;
  DenseNet<S> q2;

  DoubleCritic() = default;
  DoubleCritic(int input_dim, const std::vector<int>& hidden, Rng& rng, double final_scale = 3e-3) {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    q1 = DenseNet<S>(sizes, Activation::mish, Activation::identity, rng, final_scale);
    q2 = DenseNet<S>(sizes, Activation::mish, Activation::identity, rng, final_scale);
  }

  /// Elementwise min(Q1, Q2), one entry per column of x.
  Mat<S> q_min(const Mat<S>& x) const { return q1.forward(x).cwiseMin(q2.forward(x)); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamState {
  AdamConfig config;
  ParamList<S> m;
  ParamList<S> v;
  long step = 0;

  AdamState() = default;
  AdamState(const ParamList<S>& params, AdamConfig cfg) : config(cfg), m(zeros_like(params)), v(zeros_like(params)) {}
};

/// One bias-corrected Adam descent step.
template <typename S>
void adam_step(AdamState<S>& state, ParamList<S>& params, const ParamList<S>& grads) {
  check_same_shapes(params, grads, "adam_step");
  check_same_shapes(params, state.m, "adam_step");
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  const S b1 = S(c.beta1), b2 = S(c.beta2);
  const S step_size = static_cast<S>(c.lr / bc1);
  const S inv_sqrt_bc2 = static_cast<S>(1.0 / std::sqrt(bc2));
  const S eps = static_cast<S>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.square();
    params[i].array() -= step_size * m / (v.sqrt() * inv_sqrt_bc2 + eps);
  }
}

}  // namespace aolo
