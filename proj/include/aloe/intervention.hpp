#pragma once

#include "aloe/environment.hpp"

#include <functional>
#include <vector>

namespace aloe {

/// Per-step controller: maps the current state to an action.
using StepController = std::function<Vector(const Environment& env, const State& state)>;

/// Fires when the policy should be stopped and the expert should take over.
/// `progress_history` holds env.progress() for every state of the current
/// policy fragment, oldest first.
using TakeoverRule = std::function<bool(const Environment& env, const State& state,
                                        const std::vector<double>& progress_history)>;

/// Scripted stand-in for a human operator.
struct InterventionOracle {
  StepController expert;
  TakeoverRule takeover;
  int max_takeovers = 1;
};

inline TakeoverRule never_take_over() {
  return [](const Environment&, const State&, const std::vector<double>&) { return false; };
}

/// Fires as soon as the fragment has executed `step` policy steps.
inline TakeoverRule take_over_at_step(int step) {
  return [step](const Environment&, const State&, const std::vector<double>& history) {
    return static_cast<int>(history.size()) - 1 >= step;
  };
}

}  // namespace aloe
