#pragma once

// Adaptive-moment optimizer with decoupled weight decay, a linear-warmup
// cosine learning-rate schedule and global gradient-norm clipping.

#include "aloe/core.hpp"

#include <stdexcept>
#include <vector>

namespace aloe {

struct OptimConfig {
  double peak_lr = 3e-5;
  int warmup_steps = 100;
  int total_steps = 10000;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping

  void validate() const;
};

/// lr at 0-based `step`: peak * (step + 1) / warmup during warmup, then a
/// half-cosine from peak at `warmup_steps` down to 0 at `total_steps`.
double learning_rate(const OptimConfig& config, long step);

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(std::vector<Vector>& grads, double max_norm);

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AdamW {
 public:
  AdamW() = default;
  AdamW(OptimConfig config, const std::vector<const Vector*>& params);

  /// One update of every parameter block. Throws NumericalError, leaving the
  /// parameters untouched, when a gradient is not finite. Returns the global
  /// gradient norm before clipping.
  double step(const std::vector<Vector*>& params, std::vector<Vector> grads);

  /// Restarts the learning-rate schedule (warmup + cosine over
  /// `total_steps`) while keeping the moment estimates.
  void restart_schedule(int total_steps);

  const OptimConfig& config() const { return config_; }
  long schedule_step() const { return schedule_step_; }
  long updates() const { return updates_; }
  double current_lr() const { return learning_rate(config_, schedule_step_); }
  const std::vector<Vector>& first_moments() const { return m_; }
  const std::vector<Vector>& second_moments() const { return v_; }

 private:
  OptimConfig config_;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
  long schedule_step_ = 0;
  long updates_ = 0;
};

}  // namespace aloe
