#pragma once

// Off-policy actor-critic training: replay buffer, exploration, double-critic
// TD updates, soft target tracking, and the baseline policies.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aolo/checkpoint.hpp"
#include "aolo/env.hpp"
#include "aolo/errors.hpp"
#include "aolo/mlp.hpp"
#include "aolo/rng.hpp"
#include "aolo/snn.hpp"
#include "aolo/tensor.hpp"

namespace aolo {

constexpr int kActionDim = 2;

/// One stored transition, states already normalized to [0,1].
struct Experience {
  std::array<double, State::kDim> state{};
  RawAction action{};
  double reward = 0.0;
  std::array<double, State::kDim> next_state{};
};

template <typename S>
struct Batch {
  Mat<S> states;       // (N x B)
  Mat<S> actions;      // (M x B)
  Mat<S> rewards;      // (1 x B)
  Mat<S> next_states;  // (N x B)

  Eigen::Index size() const { return states.cols(); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000) : capacity_(capacity) {
    if (capacity == 0) throw DomainError("ReplayBuffer: capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }

  void store(const Experience& e) {
    if (data_.size() < capacity_) {
      data_.push_back(e);
    } else {
      data_[cursor_] = e;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  /// i-th oldest retained transition.
  const Experience& at(std::size_t i) const {
    if (i >= data_.size()) throw DomainError("ReplayBuffer::at: index out of range");
    return data_.size() < capacity_ ? data_[i] : data_[(cursor_ + i) % capacity_];
  }

  /// Uniform draw with replacement; returns storage slots.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (batch == 0) throw DomainError("ReplayBuffer::sample: batch must be positive");
    if (data_.size() < batch)
      throw DomainError("ReplayBuffer::sample: " + std::to_string(data_.size()) + " transitions stored, batch needs " +
                        std::to_string(batch));
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.below(data_.size());
    return idx;
  }

  const Experience& slot(std::size_t i) const { return data_.at(i); }

  template <typename S>
  Batch<S> sample(std::size_t batch, Rng& rng) const {
    const auto idx = sample_indices(batch, rng);
    const auto b = static_cast<Eigen::Index>(batch);
    Batch<S> out{Mat<S>(State::kDim, b), Mat<S>(kActionDim, b), Mat<S>(1, b), Mat<S>(State::kDim, b)};
    for (Eigen::Index c = 0; c < b; ++c) {
      const Experience& e = data_[idx[c]];
      for (int r = 0; r < State::kDim; ++r) {
        out.states(r, c) = static_cast<S>(e.state[r]);
        out.next_states(r, c) = static_cast<S>(e.next_state[r]);
      }
      for (int r = 0; r < kActionDim; ++r) out.actions(r, c) = static_cast<S>(e.action[r]);
      out.rewards(0, c) = static_cast<S>(e.reward);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Experience> data_;
};

struct TrainerConfig {
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double discount = 0.99;
  double tau = 0.005;
  int batch = 512;
  double noise_sigma = 0.1;
  long warmup = 1000;
  long episodes = 300;
  long steps_per_episode = 100;
  std::size_t buffer_capacity = 1'000'000;
  std::vector<int> critic_hidden{256, 256};
  double critic_final_scale = 3e-3;

  long total_steps() const { return episodes * steps_per_episode; }

  void validate() const {
    if (!(lr_actor > 0.0 && lr_critic > 0.0)) throw ConfigError("trainer: learning rates must be positive");
    if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("trainer.discount must lie in [0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("trainer.tau must lie in (0,1]");
    if (batch < 1) throw ConfigError("trainer.batch must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ConfigError("trainer.noise_sigma must be nonnegative");
    if (warmup < 0) throw ConfigError("trainer.warmup must be nonnegative");
    if (episodes < 1 || steps_per_episode < 1) throw ConfigError("trainer: episodes and steps_per_episode must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("trainer.buffer_capacity must be >= 1");
    for (int h : critic_hidden)
      if (h < 1) throw ConfigError("trainer.critic_hidden sizes must be >= 1");
    if (!(critic_final_scale >= 0.0)) throw ConfigError("trainer.critic_final_scale must be nonnegative");
  }
};

/// Dense actor with mish hidden layers and a tanh output squash.
template <typename S>
class MlpActor {
 public:
  using Scalar = S;
  using Trace = typename DenseNet<S>::Trace;

  MlpActor() = default;
  MlpActor(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(action_dim);
    net_ = DenseNet<S>(sizes, Activation::mish, Activation::tanh, rng);
  }

  int state_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim(); }
  const DenseNet<S>& net() const { return net_; }
  ParamList<S>& params() { return net_.params(); }
  const ParamList<S>& params() const { return net_.params(); }
  std::vector<std::string> param_names(const std::string& prefix = "") const { return net_.param_names(prefix); }

  Mat<S> forward(const Mat<S>& states) const { return net_.forward(states); }
  Mat<S> forward(const Mat<S>& states, Trace& trace) const { return net_.forward(states, trace); }
  void backward(const Trace& trace, const Mat<S>& grad_actions, ParamList<S>& grads) const {
    net_.backward(trace, grad_actions, &grads);
  }
  void project() {}

 private:
  DenseNet<S> net_;
};

template <typename S>
Mat<S> state_column(const State& s, const StateRanges& ranges) {
  const auto n = s.normalized(ranges);
  Mat<S> col(State::kDim, 1);
  for (int i = 0; i < State::kDim; ++i) col(i, 0) = static_cast<S>(n[i]);
  return col;
}

template <typename S>
Mat<S> state_matrix(const std::vector<State>& states, const StateRanges& ranges) {
  Mat<S> m(State::kDim, static_cast<Eigen::Index>(states.size()));
  for (std::size_t c = 0; c < states.size(); ++c) m.col(c) = state_column<S>(states[c], ranges);
  return m;
}

inline RawAction uniform_raw_action(Rng& rng) { return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; }

/// Actor output plus N(0, sigma^2) noise per component, clipped to [-1,1].
template <typename Actor>
RawAction select_action(const Actor& actor, const Mat<typename Actor::Scalar>& state, double noise_sigma, Rng& rng) {
  const auto y = actor.forward(state);
  RawAction a{};
  for (int j = 0; j < kActionDim; ++j) {
    const double noisy = static_cast<double>(y(j, 0)) + (noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0);
    a[j] = std::clamp(noisy, -1.0, 1.0);
  }
  return a;
}

struct StepMetrics {
  long step = 0;
  long episode = 0;
  double reward = 0.0;
  double carbon_mg = 0.0;
  double kappa = 0.0;
  double p_trans = 0.0;
  bool feasible = false;
  std::optional<double> critic_loss;
  std::optional<double> actor_obj;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

template <typename Actor>
class Trainer {
 public:
  using S = typename Actor::Scalar;

  Trainer(Actor actor, const TrainerConfig& config, const EnvConfig& env, Rng& rng)
      : config_(config), env_(env), actor_(std::move(actor)), buffer_(config.buffer_capacity) {
    config_.validate();
    env_.validate();
    if (actor_.state_dim() != State::kDim || actor_.action_dim() != kActionDim)
      throw DimensionError("Trainer: actor must map 5 state components to 2 actions");
    critic_ = DoubleCritic<S>(State::kDim + kActionDim, config_.critic_hidden, rng, config_.critic_final_scale);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = AdamState<S>(actor_.params(), {config_.lr_actor});
    q1_opt_ = AdamState<S>(critic_.q1.params(), {config_.lr_critic});
    q2_opt_ = AdamState<S>(critic_.q2.params(), {config_.lr_critic});
  }

  const TrainerConfig& config() const { return config_; }
  const EnvConfig& env() const { return env_; }
  Actor& actor() { return actor_; }
  const Actor& actor() const { return actor_; }
  const Actor& target_actor() const { return target_actor_; }
  DoubleCritic<S>& critic() { return critic_; }
  const DoubleCritic<S>& critic() const { return critic_; }
  const DoubleCritic<S>& target_critic() const { return target_critic_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long step_count() const { return step_; }
  long update_count() const { return updates_; }
  /// TD targets seen outside (penalty/(1-δ), 0); a sanity monitor, not an error.
  long td_targets_out_of_range() const { return td_out_of_range_; }

  /// ŷ = r + δ·min(Q̂1, Q̂2)(s', π̂(s')).
  Mat<S> td_targets(const Batch<S>& batch) const {
    const Mat<S> next_actions = target_actor_.forward(batch.next_states);
    return batch.rewards + static_cast<S>(config_.discount) * target_critic_.q_min(stack(batch.next_states, next_actions));
  }

  /// Mean over the batch of Σ_r (ŷ − Q_r)², with gradients for both critics.
  double critic_loss(const Batch<S>& batch, const Mat<S>& targets, ParamList<S>* g1, ParamList<S>* g2) const {
    const Mat<S> x = stack(batch.states, batch.actions);
    typename DenseNet<S>::Trace t1, t2;
    const Mat<S> q1 = critic_.q1.forward(x, t1);
    const Mat<S> q2 = critic_.q2.forward(x, t2);
    const Mat<S> e1 = targets - q1, e2 = targets - q2;
    const S inv_b = S(1) / static_cast<S>(batch.size());
    if (g1) critic_.q1.backward(t1, S(-2) * inv_b * e1, g1);
    if (g2) critic_.q2.backward(t2, S(-2) * inv_b * e2, g2);
    return (static_cast<double>(e1.squaredNorm()) + static_cast<double>(e2.squaredNorm())) / double(batch.size());
  }

  double critic_update(const Batch<S>& batch) {
    const Mat<S> y = td_targets(batch);
    const double low = env_.penalty / (1.0 - config_.discount);
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      const double v = static_cast<double>(y(0, i));
      if (!(v > low && v < 0.0)) ++td_out_of_range_;
    }
    ParamList<S> g1, g2;
    const double loss = critic_loss(batch, y, &g1, &g2);
    if (!std::isfinite(loss)) throw TrainingError("critic loss is not finite at step " + std::to_string(step_));
    adam_step(q1_opt_, critic_.q1.params(), g1);
    adam_step(q2_opt_, critic_.q2.params(), g2);
    return loss;
  }

  /// J = mean_b min(Q1, Q2)(s, π(s)); grads receives ∂(−J)/∂θ so that a descent step ascends J.
  double actor_objective(const Mat<S>& states, ParamList<S>* grads) const {
    typename Actor::Trace trace;
    const Mat<S> actions = actor_.forward(states, trace);
    const Mat<S> x = stack(states, actions);
    typename DenseNet<S>::Trace t1, t2;
    const Mat<S> q1 = critic_.q1.forward(x, t1);
    const Mat<S> q2 = critic_.q2.forward(x, t2);
    const Eigen::Index b = states.cols();
    Mat<S> pick1 = Mat<S>::Zero(1, b), pick2 = Mat<S>::Zero(1, b);
    double j = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
      const bool first = q1(0, i) <= q2(0, i);
      (first ? pick1 : pick2)(0, i) = S(-1) / static_cast<S>(b);
      j += static_cast<double>(first ? q1(0, i) : q2(0, i));
    }
    j /= double(b);
    if (grads) {
      const Mat<S> dx = critic_.q1.backward(t1, pick1, nullptr) + critic_.q2.backward(t2, pick2, nullptr);
      actor_.backward(trace, dx.bottomRows(kActionDim), *grads);
    }
    return j;
  }

  double actor_update(const Batch<S>& batch) {
    ParamList<S> grads;
    const double j = actor_objective(batch.states, &grads);
    if (!std::isfinite(j)) throw TrainingError("actor objective is not finite at step " + std::to_string(step_));
    adam_step(actor_opt_, actor_.params(), grads);
    actor_.project();
    return j;
  }

  void soft_update_targets() {
    soft_update(actor_.params(), target_actor_.params(), config_.tau);
    soft_update(critic_.q1.params(), target_critic_.q1.params(), config_.tau);
    soft_update(critic_.q2.params(), target_critic_.q2.params(), config_.tau);
  }

  /// Runs `steps` environment steps (all remaining configured steps when negative).
  void train(Rng& rng, const MetricsSink& sink = {}, long steps = -1) {
    const long end = steps < 0 ? config_.total_steps() : step_ + steps;
    if (!state_) state_ = sample_state(env_.ranges, rng);
    for (; step_ < end; ++step_) {
      const State s = *state_;
      const RawAction raw = step_ < config_.warmup
                                ? uniform_raw_action(rng)
                                : select_action(actor_, state_column<S>(s, env_.ranges), config_.noise_sigma, rng);
      const Transition tr = step(s, raw, env_, rng);
      buffer_.store({s.normalized(env_.ranges), raw, tr.reward, tr.next_state.normalized(env_.ranges)});

      StepMetrics m;
      m.step = step_;
      m.episode = step_ / config_.steps_per_episode;
      m.reward = tr.reward;
      m.carbon_mg = tr.report.carbon_total * 1e3;
      m.kappa = tr.action.kappa;
      m.p_trans = tr.action.p_trans;
      m.feasible = tr.report.feasible;
      if (step_ >= config_.warmup && buffer_.size() >= static_cast<std::size_t>(config_.batch)) {
        const Batch<S> batch = buffer_.sample<S>(config_.batch, rng);
        m.critic_loss = critic_update(batch);
        m.actor_obj = actor_update(batch);
        soft_update_targets();
        ++updates_;
        if (!all_finite(actor_.params()) || !all_finite(critic_.q1.params()) || !all_finite(critic_.q2.params()))
          throw TrainingError("non-finite network parameters at step " + std::to_string(step_));
      }
      if (sink) sink(m);
      state_ = tr.next_state;
    }
  }

  Checkpoint checkpoint(const std::string& meta = "") const {
    Checkpoint ckpt;
    ckpt.meta = meta;
    ckpt.add_all(actor_.param_names("actor."), actor_.params());
    ckpt.add_all(critic_.q1.param_names("critic.q1."), critic_.q1.params());
    ckpt.add_all(critic_.q2.param_names("critic.q2."), critic_.q2.params());
    return ckpt;
  }

 private:
  static Mat<S> stack(const Mat<S>& top, const Mat<S>& bottom) {
    Mat<S> x(top.rows() + bottom.rows(), top.cols());
    x << top, bottom;
    return x;
  }

  TrainerConfig config_;
  EnvConfig env_;
  Actor actor_;
  Actor target_actor_;
  DoubleCritic<S> critic_;
  DoubleCritic<S> target_critic_;
  AdamState<S> actor_opt_;
  AdamState<S> q1_opt_;
  AdamState<S> q2_opt_;
  ReplayBuffer buffer_;
  std::optional<State> state_;
  long step_ = 0;
  long updates_ = 0;
  long td_out_of_range_ = 0;
};

/// Uniform-random policy over the same environment loop and metrics schema.
inline void run_random_policy(const TrainerConfig& config, const EnvConfig& env, Rng& rng, const MetricsSink& sink,
                              long steps = -1) {
  config.validate();
  env.validate();
  const long end = steps < 0 ? config.total_steps() : steps;
  State s = sample_state(env.ranges, rng);
  for (long i = 0; i < end; ++i) {
    const Transition tr = step(s, uniform_raw_action(rng), env, rng);
    StepMetrics m;
    m.step = i;
    m.episode = i / config.steps_per_episode;
    m.reward = tr.reward;
    m.carbon_mg = tr.report.carbon_total * 1e3;
    m.kappa = tr.action.kappa;
    m.p_trans = tr.action.p_trans;
    m.feasible = tr.report.feasible;
    if (sink) sink(m);
    s = tr.next_state;
  }
}

struct PolicyEval {
  std::size_t n = 0;
  double mean_reward = 0.0;
  std::optional<double> mean_carbon;  // g, feasible outcomes only
  double feasibility_rate = 0.0;
  std::vector<Action> actions;
  std::vector<EvalReport> reports;
};

inline PolicyEval evaluate_actions(const std::vector<State>& states, const std::vector<Action>& actions,
                                   const EnvConfig& env) {
  if (states.size() != actions.size()) throw DimensionError("evaluate_actions: one action per state required");
  PolicyEval out;
  out.n = states.size();
  out.actions = actions;
  double carbon = 0.0;
  std::size_t feasible = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    EvalReport rep = evaluate(states[i], actions[i], env);
    out.mean_reward += reward(rep, env);
    if (rep.feasible) {
      ++feasible;
      carbon += rep.carbon_total;
    }
    out.reports.push_back(std::move(rep));
  }
  if (out.n > 0) {
    out.mean_reward /= double(out.n);
    out.feasibility_rate = double(feasible) / double(out.n);
  }
  if (feasible > 0) out.mean_carbon = carbon / double(feasible);
  return out;
}

/// Deterministic (noise-free) actions of an actor on the given states.
template <typename Actor>
std::vector<Action> policy_actions(const Actor& actor, const std::vector<State>& states, const EnvConfig& env) {
  using S = typename Actor::Scalar;
  std::vector<Action> actions;
  if (states.empty()) return actions;
  const Mat<S> y = actor.forward(state_matrix<S>(states, env.ranges));
  for (Eigen::Index c = 0; c < y.cols(); ++c)
    actions.push_back(to_action({static_cast<double>(y(0, c)), static_cast<double>(y(1, c))}, env.box));
  return actions;
}

template <typename Actor>
PolicyEval evaluate_policy(const Actor& actor, const std::vector<State>& states, const EnvConfig& env) {
  return evaluate_actions(states, policy_actions(actor, states, env), env);
}

inline std::vector<State> sample_states(std::size_t n, const StateRanges& ranges, Rng& rng) {
  std::vector<State> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) states.push_back(sample_state(ranges, rng));
  return states;
}

}  // namespace aolo
