#pragma once

// Rollout with scripted intervention, replay accumulation and the
// alternating critic / actor training phases of one RL iteration.

#include "aloe/critic.hpp"
#include "aloe/flow_policy.hpp"
#include "aloe/intervention.hpp"
#include "aloe/optim.hpp"
#include "aloe/replay_buffer.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aloe {

/// Something that picks one action per environment step.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void begin_episode() {}
  virtual Vector act(const Environment& env, const State& state, Rng& rng) = 0;
};

/// Executes the first `execution_len` actions of each sampled chunk, then
/// re-plans.
class ChunkedPolicyAgent : public Agent {
 public:
  ChunkedPolicyAgent(const FlowPolicy& policy, int execution_len);
  void begin_episode() override { cursor_ = execution_len_; }
  Vector act(const Environment& env, const State& state, Rng& rng) override;

 private:
  const FlowPolicy& policy_;
  int execution_len_;
  ActionChunk plan_;
  int cursor_;
};

class ControllerAgent : public Agent {
 public:
  explicit ControllerAgent(StepController controller) : controller_(std::move(controller)) {}
  Vector act(const Environment& env, const State& state, Rng&) override { return controller_(env, state); }

 private:
  StepController controller_;
};

/// Samples an action uniformly inside the bounds at every step.
class RandomAgent : public Agent {
 public:
  Vector act(const Environment& env, const State& state, Rng& rng) override;
};

struct IterationConfig {
  int iterations = 5;
  int success_quota = 20;
  int max_episodes_per_iteration = 200;
  int critic_steps = 500;
  int actor_steps = 200;
  int batch_size = 256;
  int execution_chunk_len = 1;
  int horizon = 1;
  int eval_episodes = 50;
  // Allows critic_steps == 0 or actor_steps == 0.
  bool test_mode = false;

  void validate() const;
};

struct RolloutStats {
  int episodes = 0;
  int policy_successes = 0;
  int policy_failures = 0;
  int handovers = 0;
  int oracle_successes = 0;
  int aborted = 0;
  int completed = 0;  // task completions by the policy or the oracle
  std::size_t segments_added = 0;
  std::size_t policy_steps = 0;
  std::size_t intervention_steps = 0;
  std::vector<int> episode_lengths;
  double mean_policy_return = 0.0;

  double success_rate() const;
  double intervention_rate() const;
  double mean_length() const;
};

/// One episode as produced by collection: the policy fragment and, after a
/// handover, the oracle fragment that continued from the same state.
struct CollectedEpisode {
  Episode policy;
  std::optional<Episode> intervention;
};

/// Runs one episode of `agent` under `oracle` supervision. Throws
/// EnvironmentError when the environment faults.
CollectedEpisode rollout_with_oracle(Agent& agent, const InterventionOracle& oracle, Environment& env,
                                     std::uint64_t seed, Rng& rng);

enum class FragmentFilter { All, InterventionOnly };

/// Collects episodes until `success_quota` tasks are completed or the episode
/// cap is reached. Fragments selected by `keep` are appended to `buffer`.
RolloutStats collect_iteration(Agent& agent, const InterventionOracle& oracle, Environment& env,
                               ReplayBuffer& buffer, const IterationConfig& config, int iteration, Rng& rng,
                               FragmentFilter keep = FragmentFilter::All);

struct TrainStats {
  double critic_loss = 0.0;  // mean over the critic phase
  double actor_loss = 0.0;   // mean over the actor phase
  double mean_weight = 0.0;
  int critic_updates = 0;
  int actor_updates = 0;
};

/// critic_steps of TD regression + Polyak averaging, then actor_steps of
/// advantage-weighted flow matching. Bootstrap chunks come from
/// `target_sampler` when given, else from the current policy.
TrainStats train_iteration(const ReplayBuffer& buffer, EnsembleCritic& critic, AdamW& critic_opt,
                           FlowPolicy& policy, AdamW& actor_opt, const IterationConfig& config, Rng& rng,
                           const ChunkSampler* target_sampler = nullptr);

/// Describes the batch and parameters after a non-finite loss.
std::string numerical_diagnostic(const std::string& phase, int step, const std::vector<std::size_t>& indices,
                                 const std::vector<const Vector*>& params);

struct EvalStats {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
};

/// Runs `n_episodes` without intervention; episode i resets with seed + i.
EvalStats evaluate(Agent& agent, Environment& env, int n_episodes, std::uint64_t seed);

}  // namespace aloe
