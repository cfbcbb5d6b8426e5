#pragma once

// Population-coded spiking actor: Gaussian receptive fields feeding one-step
// soft-reset IF neurons, current-based LIF layers, and a firing-rate decoder.
//
// Spike trains are stored time-major as (neurons x T*B) matrices: column block
// t holds the B batch columns of timestep t, so each layer's synaptic input for
// all timesteps is a single GEMM.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aolo/errors.hpp"
#include "aolo/rng.hpp"
#include "aolo/tensor.hpp"

namespace aolo {

struct SnnConfig {
  int state_dim = 5;     // N
  int action_dim = 2;    // M
  int t_snn = 10;
  int encoder_dim = 20;  // N_e, neurons per state component
  int decoder_dim = 10;  // M_d, neurons per action component
  std::vector<int> hidden{256, 256};
  double d_c = 0.5;
  double d_v = 0.75;
  double v_th = 0.999;
  double encoder_v_th = 0.999;
  double window = 0.5;          // width of the rectangular pseudo-gradient
  double init_gain = 2.449489742783178;  // LIF weights ~ U(±gain/sqrt(fan_in)), sqrt(6) by default
  double decoder_init = 0.1;    // decoder weights ~ U(±decoder_init/sqrt(M_d))
  bool train_encoder = true;
  bool relaxed = false;         // replace the step by a ramp of width `window`

  void validate() const {
    if (state_dim < 1 || action_dim < 1) throw ConfigError("snn: state_dim and action_dim must be >= 1");
    if (t_snn < 1) throw ConfigError("snn.t_snn must be >= 1");
    if (encoder_dim < 1) throw ConfigError("snn.encoder_dim must be >= 1");
    if (decoder_dim < 1) throw ConfigError("snn.decoder_dim must be >= 1");
    for (int h : hidden)
      if (h < 1) throw ConfigError("snn.hidden sizes must be >= 1");
    if (!(d_c >= 0.0 && d_c < 1.0)) throw ConfigError("snn.d_c must lie in [0,1)");
    if (!(d_v >= 0.0 && d_v < 1.0)) throw ConfigError("snn.d_v must lie in [0,1)");
    if (!(v_th > 0.0)) throw ConfigError("snn.v_th must be positive");
    if (!(encoder_v_th > 0.0)) throw ConfigError("snn.encoder_v_th must be positive");
    if (!(window > 0.0)) throw ConfigError("snn.window must be positive");
    if (!(init_gain > 0.0)) throw ConfigError("snn.init_gain must be positive");
    if (!(decoder_init >= 0.0)) throw ConfigError("snn.decoder_init must be nonnegative");
  }
};

/// Firing nonlinearity and its pseudo-derivative.
struct SpikeFn {
  double window = 0.5;
  bool relaxed = false;

  template <typename Derived>
  auto fire(const Eigen::ArrayBase<Derived>& x) const {
    using S = typename Derived::Scalar;
    const S w = static_cast<S>(window);
    if (relaxed) return ((x / w + S(0.5)).max(S(0)).min(S(1))).eval();
    return (x >= S(0)).template cast<S>().eval();
  }

  template <typename Derived>
  auto grad(const Eigen::ArrayBase<Derived>& x) const {
    using S = typename Derived::Scalar;
    const S half = static_cast<S>(0.5 * window);
    return ((x.abs() < half).template cast<S>() * static_cast<S>(1.0 / window)).eval();
  }
};

template <typename S>
struct EncoderTrace {
  Mat<S> stim;    // U, (N*N_e x B)
  Mat<S> pre;     // v^{t-1} + U - v_th, (N*N_e x T*B)
  Mat<S> spikes;  // (N*N_e x T*B)
};

template <typename S>
struct LifTrace {
  Mat<S> volt;    // (out x T*B)
  Mat<S> spikes;  // (out x T*B)
};

/// Gaussian receptive fields plus IF neurons. mu and sigma are (N*N_e x 1),
/// entry i*N_e + j belonging to state component i. states is (N x B).
template <typename S>
void encode(const Mat<S>& mu, const Mat<S>& sigma, const Mat<S>& states, int encoder_dim, int t_snn,
            double v_th, const SpikeFn& fn, EncoderTrace<S>& out) {
  const Eigen::Index n = states.rows(), batch = states.cols(), width = n * encoder_dim;
  if (mu.rows() != width || sigma.rows() != width || mu.cols() != 1 || sigma.cols() != 1)
    throw DimensionError("encode: receptive fields do not match state width " + std::to_string(n));
  if (t_snn < 1) throw DimensionError("encode: t_snn must be >= 1");
  out.stim.resize(width, batch);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < encoder_dim; ++j) {
      const Eigen::Index r = i * encoder_dim + j;
      const auto z = (states.row(i).array() - mu(r, 0)) / sigma(r, 0);
      out.stim.row(r) = (S(-0.5) * z.square()).exp().matrix();
    }
  out.pre.resize(width, t_snn * batch);
  out.spikes.resize(width, t_snn * batch);
  const S th = static_cast<S>(v_th);
  Mat<S> v = Mat<S>::Zero(width, batch);
  for (int t = 0; t < t_snn; ++t) {
    auto pre = out.pre.middleCols(t * batch, batch);
    auto o = out.spikes.middleCols(t * batch, batch);
    pre = v + out.stim - Mat<S>::Constant(width, batch, th);
    o = fn.fire(pre.array()).matrix();
    v += out.stim - th * o;
  }
}

/// Returns dL/dU given dL/d(spikes) over all timesteps.
template <typename S>
Mat<S> encode_backward(const EncoderTrace<S>& trace, const Mat<S>& grad_spikes, int t_snn, double v_th,
                       const SpikeFn& fn) {
  const Eigen::Index width = trace.stim.rows(), batch = trace.stim.cols();
  if (grad_spikes.rows() != width || grad_spikes.cols() != t_snn * batch)
    throw DimensionError("encode_backward: gradient shape mismatch");
  const S th = static_cast<S>(v_th);
  Mat<S> g_stim = Mat<S>::Zero(width, batch);
  Mat<S> g_v = Mat<S>::Zero(width, batch);
  for (int t = t_snn; t-- > 0;) {
    const auto pre = trace.pre.middleCols(t * batch, batch).array();
    const Mat<S> g_pre =
        ((grad_spikes.middleCols(t * batch, batch).array() - th * g_v.array()) * fn.grad(pre)).matrix();
    g_stim += g_pre + g_v;
    g_v += g_pre;
  }
  return g_stim;
}

/// Products with a spike-train operand. Binary trains are mostly zeros, so
/// when the nonzero fraction is small the work is done column by column over
/// the active inputs only; otherwise a dense GEMM is used.
namespace detail {

constexpr double kSparseDensity = 0.15;

template <typename S>
double nonzero_fraction(const Mat<S>& x) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>((x.array() != S(0)).count()) / static_cast<double>(x.size());
}

// Row indices of the nonzero entries of column c, written branch-free.
template <typename S>
Eigen::Index active_rows(const Mat<S>& x, Eigen::Index c, std::vector<Eigen::Index>& idx) {
  idx.resize(x.rows());
  const S* col = x.data() + c * x.rows();
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    idx[n] = i;
    n += col[i] != S(0);
  }
  return n;
}

// out = w * x
template <typename S>
void spike_product(const Mat<S>& w, const Mat<S>& x, Mat<S>& out) {
  if (nonzero_fraction(x) > kSparseDensity) {
    out.noalias() = w * x;
    return;
  }
  out.setZero(w.rows(), x.cols());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto dst = out.col(c);
    const Eigen::Index n = active_rows(x, c, idx);
    for (Eigen::Index k = 0; k < n; ++k) {
      const S v = x(idx[k], c);
      if (v == S(1))
        dst += w.col(idx[k]);
      else
        dst += v * w.col(idx[k]);
    }
  }
}

// out = g * x^T
template <typename S>
void spike_outer(const Mat<S>& g, const Mat<S>& x, Mat<S>& out) {
  if (nonzero_fraction(x) > kSparseDensity) {
    out.noalias() = g * x.transpose();
    return;
  }
  out.setZero(g.rows(), x.rows());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const auto src = g.col(c);
    const Eigen::Index n = active_rows(x, c, idx);
    for (Eigen::Index k = 0; k < n; ++k) {
      const S v = x(idx[k], c);
      if (v == S(1))
        out.col(idx[k]) += src;
      else
        out.col(idx[k]) += v * src;
    }
  }
}

constexpr Eigen::Index kLifBlock = 1024;

// Elementwise LIF recursion over all timesteps; n = neurons * batch. Works in
// blocks so that the membrane state of a block stays in L1 across timesteps.
template <typename S, typename Fire>
void lif_kernel(Eigen::Index n, int t_snn, const S* __restrict drive, S* __restrict volt, S* __restrict spikes,
                S dc, S dv, S th, Fire fire) {
  alignas(64) S c[kLifBlock], v[kLifBlock], o[kLifBlock];
  for (Eigen::Index k0 = 0; k0 < n; k0 += kLifBlock) {
    const Eigen::Index len = std::min(kLifBlock, n - k0);
    std::fill_n(c, len, S(0));
    std::fill_n(v, len, S(0));
    std::fill_n(o, len, S(0));
    for (int t = 0; t < t_snn; ++t) {
      const S* __restrict in = drive + t * n + k0;
      S* __restrict vt = volt + t * n + k0;
      S* __restrict ot = spikes + t * n + k0;
      for (Eigen::Index k = 0; k < len; ++k) {
        const S ck = dc * c[k] + in[k];
        const S vk = dv * v[k] * (S(1) - o[k]) + ck;
        const S ok = fire(vk - th);
        c[k] = ck;
        v[k] = vk;
        o[k] = ok;
        vt[k] = vk;
        ot[k] = ok;
      }
    }
  }
}

template <typename S>
void lif_backward_kernel(Eigen::Index n, int t_snn, const S* __restrict volt, const S* __restrict spikes,
                         const S* __restrict grad_spikes, S* __restrict grad_current, S dc, S dv, S th, S half,
                         S slope) {
  alignas(64) S g_v[kLifBlock], g_c[kLifBlock];
  for (Eigen::Index k0 = 0; k0 < n; k0 += kLifBlock) {
    const Eigen::Index len = std::min(kLifBlock, n - k0);
    std::fill_n(g_v, len, S(0));
    std::fill_n(g_c, len, S(0));
    for (int t = t_snn; t-- > 0;) {
      const S* __restrict vt = volt + t * n + k0;
      const S* __restrict ot = spikes + t * n + k0;
      const S* __restrict gs = grad_spikes + t * n + k0;
      S* __restrict gc = grad_current + t * n + k0;
      for (Eigen::Index k = 0; k < len; ++k) {
        // g_v and g_c hold the gradients flowing back from step t+1.
        const S g_o = gs[k] - dv * vt[k] * g_v[k];
        const S h = std::abs(vt[k] - th) < half ? slope : S(0);
        const S gv = g_o * h + dv * (S(1) - ot[k]) * g_v[k];
        const S gck = gv + dc * g_c[k];
        g_v[k] = gv;
        g_c[k] = gck;
        gc[k] = gck;
      }
    }
  }
}

}  // namespace detail

/// Current-based LIF layer over a whole spike train. input is (in x T*B).
template <typename S>
void lif_forward(const Mat<S>& weight, const Mat<S>& bias, const Mat<S>& input, int t_snn, double d_c,
                 double d_v, double v_th, const SpikeFn& fn, LifTrace<S>& out) {
  if (input.rows() != weight.cols())
    throw DimensionError("lif_forward: input width " + std::to_string(input.rows()) + " != " +
                         std::to_string(weight.cols()));
  if (bias.rows() != weight.rows() || bias.cols() != 1) throw DimensionError("lif_forward: bias shape");
  if (t_snn < 1 || input.cols() % t_snn != 0) throw DimensionError("lif_forward: train length mismatch");
  const Eigen::Index width = weight.rows(), batch = input.cols() / t_snn;
  Mat<S> drive;
  detail::spike_product(weight, input, drive);
  drive.colwise() += bias.col(0);
  out.volt.resize(width, input.cols());
  out.spikes.resize(width, input.cols());
  const S dc = static_cast<S>(d_c), dv = static_cast<S>(d_v), th = static_cast<S>(v_th);
  const Eigen::Index n = width * batch;
  if (fn.relaxed) {
    const S inv_w = static_cast<S>(1.0 / fn.window);
    detail::lif_kernel(n, t_snn, drive.data(), out.volt.data(), out.spikes.data(), dc, dv, th, [inv_w](S x) { return std::clamp(x * inv_w + S(0.5), S(0), S(1)); });
  } else {
    detail::lif_kernel(n, t_snn, drive.data(), out.volt.data(), out.spikes.data(), dc, dv, th, [](S x) { return x >= S(0) ? S(1) : S(0); });
  }
}

/// Backpropagation through time for one LIF layer. Writes weight and bias
/// gradients and, when grad_input is non-null, dL/d(input spikes).
template <typename S>
void lif_backward(const Mat<S>& weight, const Mat<S>& input, const LifTrace<S>& trace, const Mat<S>& grad_spikes,
                  int t_snn, double d_c, double d_v, double v_th, const SpikeFn& fn, Mat<S>& grad_weight,
                  Mat<S>& grad_bias, Mat<S>* grad_input) {
  const Eigen::Index width = weight.rows(), batch = input.cols() / t_snn;
  if (grad_spikes.rows() != width || grad_spikes.cols() != input.cols() || trace.volt.cols() != input.cols())
    throw DimensionError("lif_backward: gradient or trace shape mismatch");
  const S dc = static_cast<S>(d_c), dv = static_cast<S>(d_v), th = static_cast<S>(v_th);
  const S half = static_cast<S>(0.5 * fn.window), slope = static_cast<S>(1.0 / fn.window);
  const Eigen::Index n = width * batch;
  Mat<S> g_cur(width, input.cols());
  detail::lif_backward_kernel(n, t_snn, trace.volt.data(), trace.spikes.data(), grad_spikes.data(), g_cur.data(), dc,
                              dv, th, half, slope);
  detail::spike_outer(g_cur, input, grad_weight);
  grad_bias = g_cur.rowwise().sum();
  if (grad_input) grad_input->noalias() = weight.transpose() * g_cur;
}

/// Firing rates of the output populations. spikes is (M*M_d x T*B);
/// returns the rates (M*M_d x B) and writes pre-squash actions (M x B).
template <typename S>
Mat<S> decode(const Mat<S>& weight, const Mat<S>& bias, const Mat<S>& spikes, int decoder_dim, int t_snn,
              Mat<S>& actions) {
  const Eigen::Index m = bias.rows();
  if (weight.rows() != m * decoder_dim || weight.cols() != 1 || bias.cols() != 1)
    throw DimensionError("decode: decoder parameter shapes");
  if (spikes.rows() != m * decoder_dim)
    throw DimensionError("decode: " + std::to_string(spikes.rows()) + " output neurons do not split into " +
                         std::to_string(m) + " populations of " + std::to_string(decoder_dim));
  if (t_snn < 1 || spikes.cols() % t_snn != 0) throw DimensionError("decode: train length mismatch");
  const Eigen::Index batch = spikes.cols() / t_snn;
  Mat<S> rate = Mat<S>::Zero(spikes.rows(), batch);
  for (int t = 0; t < t_snn; ++t) rate += spikes.middleCols(t * batch, batch);
  rate /= static_cast<S>(t_snn);
  actions.resize(m, batch);
  for (Eigen::Index j = 0; j < m; ++j)
    actions.row(j) = weight.middleRows(j * decoder_dim, decoder_dim).transpose() *
                         rate.middleRows(j * decoder_dim, decoder_dim) +
                     Mat<S>::Constant(1, batch, bias(j, 0));
  return rate;
}

template <typename S>
class SpikingActor {
 public:
  using Scalar = S;

  struct Trace {
    Mat<S> states;
    EncoderTrace<S> encoder;
    std::vector<LifTrace<S>> layers;
    Mat<S> rate;
    Mat<S> actions;  // squashed, (M x B)
  };

  SpikingActor() = default;

  SpikingActor(const SnnConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const int n = config_.state_dim, ne = config_.encoder_dim;
    Mat<S> mu(n * ne, 1), sigma(n * ne, 1);
    const double spacing = ne > 1 ? 1.0 / (ne - 1) : 1.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < ne; ++j) {
        mu(i * ne + j, 0) = static_cast<S>(ne > 1 ? j * spacing : 0.5);
        sigma(i * ne + j, 0) = static_cast<S>(spacing);
      }
    params_.push_back(std::move(mu));
    params_.push_back(std::move(sigma));
    const std::vector<int> sizes = layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Mat<S> w(sizes[l + 1], sizes[l]), b(sizes[l + 1], 1);
      const double bound = config_.init_gain / std::sqrt(double(sizes[l]));
      fill_uniform(w, bound, rng);
      fill_uniform(b, bound, rng);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
    Mat<S> wd(config_.action_dim * config_.decoder_dim, 1);
    fill_uniform(wd, config_.decoder_init / std::sqrt(double(config_.decoder_dim)), rng);
    params_.push_back(std::move(wd));
    params_.push_back(Mat<S>::Zero(config_.action_dim, 1));
  }

  const SnnConfig& config() const { return config_; }
  int state_dim() const { return config_.state_dim; }
  int action_dim() const { return config_.action_dim; }
  /// Number of LIF layers, the output population included.
  std::size_t num_lif_layers() const { return config_.hidden.size() + 1; }

  /// {N*N_e, hidden..., M*M_d}
  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{config_.state_dim * config_.encoder_dim};
    sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
    sizes.push_back(config_.action_dim * config_.decoder_dim);
    return sizes;
  }

  ParamList<S>& params() { return params_; }
  const ParamList<S>& params() const { return params_; }

  std::vector<std::string> param_names(const std::string& prefix = "") const {
    std::vector<std::string> names{prefix + "encoder.mu", prefix + "encoder.sigma"};
    for (std::size_t l = 0; l < num_lif_layers(); ++l) {
      names.push_back(prefix + "lif" + std::to_string(l) + ".weight");
      names.push_back(prefix + "lif" + std::to_string(l) + ".bias");
    }
    names.push_back(prefix + "decoder.weight");
    names.push_back(prefix + "decoder.bias");
    return names;
  }

  const Mat<S>& mu() const { return params_[0]; }
  const Mat<S>& sigma() const { return params_[1]; }
  const Mat<S>& lif_weight(std::size_t l) const { return params_[2 + 2 * l]; }
  const Mat<S>& lif_bias(std::size_t l) const { return params_[3 + 2 * l]; }
  const Mat<S>& decoder_weight() const { return params_[params_.size() - 2]; }
  const Mat<S>& decoder_bias() const { return params_.back(); }

  SpikeFn spike_fn() const { return {config_.window, config_.relaxed}; }

  /// states: normalized, (N x B). Returns actions in [-1,1], (M x B).
  Mat<S> forward(const Mat<S>& states) const {
    Trace trace;
    return forward(states, trace);
  }

  Mat<S> forward(const Mat<S>& states, Trace& trace) const {
    if (states.rows() != config_.state_dim)
      throw DimensionError("SpikingActor: state has " + std::to_string(states.rows()) + " rows, expected " +
                           std::to_string(config_.state_dim));
    check_sigma();
    const SpikeFn fn = spike_fn();
    const int t = config_.t_snn;
    trace.states = states;
    encode(mu(), sigma(), states, config_.encoder_dim, t, config_.encoder_v_th, fn, trace.encoder);
    trace.layers.resize(num_lif_layers());
    const Mat<S>* input = &trace.encoder.spikes;
    for (std::size_t l = 0; l < num_lif_layers(); ++l) {
      lif_forward(lif_weight(l), lif_bias(l), *input, t, config_.d_c, config_.d_v, config_.v_th, fn,
                  trace.layers[l]);
      input = &trace.layers[l].spikes;
    }
    Mat<S> pre;
    trace.rate = decode(decoder_weight(), decoder_bias(), *input, config_.decoder_dim, t, pre);
    trace.actions = pre.array().tanh().matrix();
    return trace.actions;
  }

  /// Gradients of L with respect to every parameter tensor, given dL/d(actions).
  /// grads is overwritten; encoder gradients are zero when the encoder is frozen.
  void backward(const Trace& trace, const Mat<S>& grad_actions, ParamList<S>& grads) const {
    if (trace.layers.size() != num_lif_layers() || trace.actions.size() == 0)
      throw DimensionError("SpikingActor::backward: missing trace");
    if (grad_actions.rows() != trace.actions.rows() || grad_actions.cols() != trace.actions.cols())
      throw DimensionError("SpikingActor::backward: gradient shape mismatch");
    grads = zeros_like(params_);
    const SpikeFn fn = spike_fn();
    const int t = config_.t_snn, md = config_.decoder_dim;
    const Eigen::Index batch = grad_actions.cols();

    const Mat<S> g_pre = (grad_actions.array() * (S(1) - trace.actions.array().square())).matrix();
    Mat<S>& g_wd = grads[params_.size() - 2];
    Mat<S>& g_bd = grads.back();
    g_bd = g_pre.rowwise().sum();
    Mat<S> g_rate(trace.rate.rows(), batch);
    for (int j = 0; j < config_.action_dim; ++j) {
      g_wd.middleRows(j * md, md) = trace.rate.middleRows(j * md, md) * g_pre.row(j).transpose();
      g_rate.middleRows(j * md, md) = decoder_weight().middleRows(j * md, md) * g_pre.row(j);
    }
    g_rate /= static_cast<S>(t);
    Mat<S> g_spikes = g_rate.replicate(1, t);

    for (std::size_t l = num_lif_layers(); l-- > 0;) {
      const Mat<S>& input = l == 0 ? trace.encoder.spikes : trace.layers[l - 1].spikes;
      const bool need_input = l > 0 || config_.train_encoder;
      Mat<S> g_input;
      lif_backward(lif_weight(l), input, trace.layers[l], g_spikes, t, config_.d_c, config_.d_v, config_.v_th, fn,
                   grads[2 + 2 * l], grads[3 + 2 * l], need_input ? &g_input : nullptr);
      g_spikes = std::move(g_input);
    }
    if (!config_.train_encoder) return;

    const Mat<S> g_stim = encode_backward(trace.encoder, g_spikes, t, config_.encoder_v_th, fn);
    const int ne = config_.encoder_dim;
    for (int i = 0; i < config_.state_dim; ++i)
      for (int j = 0; j < ne; ++j) {
        const Eigen::Index r = i * ne + j;
        const S s = sigma()(r, 0);
        const auto z = (trace.states.row(i).array() - mu()(r, 0)) / s;
        const auto gu = g_stim.row(r).array() * trace.encoder.stim.row(r).array();
        grads[0](r, 0) = (gu * z).sum() / s;
        grads[1](r, 0) = (gu * z.square()).sum() / s;
      }
  }

  /// Keeps receptive-field widths positive after an optimizer step.
  void project() {
    params_[1] = params_[1].cwiseMax(static_cast<S>(kMinSigma));
  }

  static constexpr double kMinSigma = 1e-3;

 private:
  void check_sigma() const {
    if (!(sigma().array() > S(0)).all()) throw DomainError("SpikingActor: receptive-field widths must be positive");
  }

  SnnConfig config_;
  ParamList<S> params_;
};

}  // namespace aolo
