#pragma once

// Metrics CSV stream and per-run summary statistics.

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>

#include "aolo/rl.hpp"

namespace aolo {

constexpr const char* kMetricsHeader = "step,episode,reward,carbon_mg,kappa,p_trans,feasible,critic_loss,actor_obj";

/// Shortest round-trip decimal form; empty for a missing value.
inline std::string format_value(std::optional<double> v) { return v ? fmt::format("{}", *v) : std::string(); }

inline std::string metrics_row(const StepMetrics& m) {
  return fmt::format("{},{},{},{},{},{},{},{},{}", m.step, m.episode, m.reward, m.carbon_mg, m.kappa, m.p_trans,
                     m.feasible ? 1 : 0, format_value(m.critic_loss), format_value(m.actor_obj));
}

class MetricsCsv {
 public:
  explicit MetricsCsv(const std::string& path) : out_(fmt::output_file(path)) { out_.print("{}\n", kMetricsHeader); }

  void operator()(const StepMetrics& m) { out_.print("{}\n", metrics_row(m)); }

  void close() { out_.close(); }

 private:
  fmt::ostream out_;
};

/// Running statistics over a metrics stream of known length.
class RunSummary {
 public:
  /// The "final" window is the last max(1, total/10) steps; the early window the first `early` steps.
  explicit RunSummary(long total_steps, long early = 3000)
      : total_(total_steps), final_start_(total_steps - std::max(1L, total_steps / 10)), early_(early) {}

  void operator()(const StepMetrics& m) {
    ++steps_;
    if (m.critic_loss) ++updates_;
    if (m.step < early_) {
      early_sum_ += m.reward;
      ++early_n_;
    }
    if (m.step >= final_start_) {
      final_reward_ += m.reward;
      ++final_n_;
      if (m.feasible) {
        final_carbon_ += m.carbon_mg;
        ++final_feasible_;
      }
    }
  }

  long steps() const { return steps_; }
  long updates() const { return updates_; }
  double final_mean_reward() const { return final_n_ ? final_reward_ / final_n_ : 0.0; }
  std::optional<double> final_mean_carbon_mg() const {
    if (!final_feasible_) return std::nullopt;
    return final_carbon_ / final_feasible_;
  }
  double final_feasibility() const { return final_n_ ? double(final_feasible_) / final_n_ : 0.0; }
  double early_mean_reward() const { return early_n_ ? early_sum_ / early_n_ : 0.0; }

 private:
  long total_;
  long final_start_;
  long early_;
  long steps_ = 0;
  long updates_ = 0;
  double early_sum_ = 0.0;
  long early_n_ = 0;
  double final_reward_ = 0.0;
  long final_n_ = 0;
  double final_carbon_ = 0.0;
  long final_feasible_ = 0;
};

}  // namespace aolo
