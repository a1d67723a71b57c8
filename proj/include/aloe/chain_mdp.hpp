#pragma once

// A deterministic chain MDP with goal and trap states, plus an exact
// chunk-level policy evaluation oracle.

#include "aloe/environment.hpp"

#include <vector>

namespace aloe {

struct ChainMdp {
  int n_states = 5;
  int start_state = 2;
  int goal_state = 4;
  std::vector<int> trap_states{0};
  double gamma = 0.9;
  int max_steps = 100;
  double c_fail = 10.0;

  void validate() const;
  bool is_goal(int s) const { return s == goal_state; }
  bool is_trap(int s) const;
  bool is_terminal(int s) const { return is_goal(s) || is_trap(s); }
  /// action 0 moves left, 1 moves right; the ends of the chain are walls.
  int next(int s, int action) const;
  RewardSpec reward_spec() const { return RewardSpec{c_fail, -1.0}; }
};

/// Continuous actions map to discrete moves by sign: a >= 0 is "right".
int chain_action_index(double a);
double chain_action_value(int action);

/// A chunk of h discrete moves is encoded as an integer code whose bit
/// (h - 1 - k) holds the move executed at step k.
int chain_chunk_count(int horizon);
ActionChunk chain_chunk(int code, int horizon);
int chain_chunk_code(const ActionChunk& chunk);
int chain_state_index(const State& state);
State chain_state(const ChainMdp& mdp, int s);

struct ChainChunkOutcome {
  std::vector<double> rewards;
  int next_state = 0;
  bool terminated = false;
  bool success = false;
};

/// Executes all h moves of `code` from `s`, stopping at termination.
ChainChunkOutcome simulate_chain_chunk(const ChainMdp& mdp, int s, int code, int horizon);

/// The segment produced by executing chunk `code` from `s`. Rows past the
/// termination point keep the planned moves.
TransitionSegment chain_segment(const ChainMdp& mdp, int s, int code, int horizon);

/// A stochastic chunk-level policy: probs[s][code].
struct ChunkPolicyTable {
  int horizon = 1;
  std::vector<std::vector<double>> probs;

  static ChunkPolicyTable deterministic(const std::vector<int>& codes, int horizon);
  static ChunkPolicyTable uniform(int n_states, int horizon);
  void validate(const ChainMdp& mdp) const;
  ActionChunk sample(const State& state, Rng& rng) const;
};

/// Q^pi(s, code) for the chunked policy, by iterative Bellman evaluation to a
/// fixed-point tolerance. Rows for terminal states are zero. Throws
/// std::runtime_error when the iteration cap is reached.
Matrix value_iteration_oracle(const ChainMdp& mdp, const ChunkPolicyTable& policy,
                              double tolerance = 1e-10, int max_iterations = 1000000);

/// Largest violation of the chunked Bellman equation by a Q table.
double chain_bellman_residual(const ChainMdp& mdp, const ChunkPolicyTable& policy,
                              const Matrix& q);

class ChainEnv : public Environment {
 public:
  explicit ChainEnv(ChainMdp mdp);

  int obs_dim() const override { return mdp_.n_states; }
  int action_dim() const override { return 1; }
  const ActionBounds& bounds() const override { return bounds_; }
  RewardSpec reward_spec() const override { return mdp_.reward_spec(); }
  int max_steps() const override { return mdp_.max_steps; }

  State reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  const State& state() const override { return state_; }
  bool done() const override { return done_; }
  int steps() const override { return steps_; }
  void restart_clock() override { steps_ = 0; }
  double progress(const State& state) const override;
  std::unique_ptr<Environment> clone() const override;

  const ChainMdp& mdp() const { return mdp_; }

 private:
  ChainMdp mdp_;
  ActionBounds bounds_;
  State state_;
  int position_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace aloe
