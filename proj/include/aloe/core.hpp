#pragma once

// Episodic MDP vocabulary shared by every module: states, chunked actions,
// transition segments and the sparse terminal reward.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace aloe {

using Rng = std::mt19937_64;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct State {
  Vector obs;
  int task_id = 0;

  bool operator==(const State& other) const;
};

/// h consecutive actions of dimension d, stored one action per row.
///
/// Only the first `valid_len` rows were executed. Rows past `valid_len` are
/// padding: the planned-but-unexecuted actions when they are known, zeros
/// otherwise.
struct ActionChunk {
  Matrix actions;
  int valid_len = 0;

  ActionChunk() = default;
  ActionChunk(Matrix a, int valid);
  explicit ActionChunk(Matrix a);

  int horizon() const { return static_cast<int>(actions.rows()); }
  int action_dim() const { return static_cast<int>(actions.cols()); }
  bool full() const { return valid_len == horizon(); }

  /// Row-major flattening: a_t, a_{t+1}, ... concatenated.
  Vector flattened() const;
  static ActionChunk from_flat(const Vector& flat, int horizon, int action_dim);

  bool operator==(const ActionChunk& other) const;
};

enum class Source { PolicyRollout, Intervention };

std::string to_string(Source source);
Source source_from_string(std::string_view text);

/// The unit of critic training: (s_t, a_{t:t+h}, r_{t:t+L-1}, s_{t+L}, d).
struct TransitionSegment {
  State state;
  ActionChunk chunk;
  std::vector<double> rewards;
  State next_state;
  bool terminated = false;
  bool success = false;
  // Terminated by an intervention takeover rather than by the environment.
  bool handover = false;
  Source source = Source::PolicyRollout;

  std::int64_t episode = -1;
  int start_step = 0;
  int iteration = 0;

  /// Throws std::invalid_argument when the segment invariants are broken.
  void validate() const;
  double reward_sum() const;
  bool operator==(const TransitionSegment& other) const;
};

struct RewardSpec {
  double c_fail = 1.0;
  double step_penalty = -1.0;
};

/// 0 on terminal success, -c_fail on terminal failure, -1 otherwise.
double step_reward(bool success, bool failure, bool terminal, const RewardSpec& spec);

/// Discounted sum of rewards, sum_k gamma^k r_k.
double discounted_sum(const std::vector<double>& rewards, double gamma);

Vector task_one_hot(int task_id, int num_tasks);

/// One environment step as recorded during a rollout.
struct StepRecord {
  State state;
  Vector action;
  double reward = 0.0;
  bool terminated = false;
  bool success = false;
  bool handover = false;
  Source source = Source::PolicyRollout;
};

struct Episode {
  std::vector<StepRecord> steps;
  State final_state;
};

}  // namespace aloe
