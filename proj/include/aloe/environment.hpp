#pragma once

#include "aloe/core.hpp"

#include <cstdint>
#include <memory>

namespace aloe {

struct ActionBounds {
  Vector low;
  Vector high;

  Vector clip(const Vector& action) const;
  bool contains(const Vector& action) const;
  Matrix clip_rows(const Matrix& actions) const;
};

struct StepResult {
  State state;
  double reward = 0.0;
  bool terminated = false;
  bool success = false;
};

class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A deterministic, seedable episodic environment.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int num_tasks() const { return 1; }
  virtual const ActionBounds& bounds() const = 0;
  virtual RewardSpec reward_spec() const = 0;
  virtual int max_steps() const = 0;

  virtual State reset(std::uint64_t seed) = 0;
  /// Actions outside the bounds are clipped. Throws EnvironmentError when the
  /// episode has already terminated.
  virtual StepResult step(const Vector& action) = 0;

  virtual const State& state() const = 0;
  virtual bool done() const = 0;
  virtual int steps() const = 0;

  /// Starts a fresh step budget from the current state. Used when an
  /// intervention continues an episode after a handover.
  virtual void restart_clock() = 0;

  /// A scalar in [0, 1] measuring task completion, used for stall detection
  /// and for aligning traces by progress.
  virtual double progress(const State& state) const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

}  // namespace aloe
