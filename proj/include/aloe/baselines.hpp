#pragma once

// Comparison methods sharing the flow-policy backbone: behavior cloning,
// intervention-aggregating DAgger, and AWR with a distributional Monte-Carlo
// value critic.

#include "aloe/hitl_loop.hpp"

#include <vector>

namespace aloe {

/// One bc_loss_and_grads step followed by an optimizer update. Returns the loss.
double bc_update(const SegmentBatch& batch, FlowPolicy& policy, AdamW& opt, Rng& rng);

/// actor_steps BC updates on uniform batches from `dataset`.
double bc_train(const ReplayBuffer& dataset, FlowPolicy& policy, AdamW& opt, int steps, int batch_size, Rng& rng);

struct DaggerStats {
  RolloutStats rollout;
  std::size_t dataset_size = 0;
  double bc_loss = 0.0;
};

/// Rolls out the policy under the oracle, aggregates only the oracle's
/// demonstrations, then retrains with BC on the aggregate.
DaggerStats dagger_iteration(FlowPolicy& policy, AdamW& opt, const InterventionOracle& oracle, Environment& env,
                             ReplayBuffer& dataset, const IterationConfig& config, int iteration, Rng& rng);

struct DistributionalConfig {
  int bins = 256;
  double v_min = -1.0;
  double v_max = 0.0;
  std::vector<int> hidden{256, 256};
  Activation activation = Activation::ReLU;

  void validate() const;
};

/// Lower bracket for returns: -c_fail * (1 + gamma * max_steps).
double default_v_min(double c_fail, double gamma, int max_steps);

/// State-value distribution over a uniform grid of return bins.
class DistributionalValueCritic {
 public:
  DistributionalValueCritic(int obs_dim, int num_tasks, DistributionalConfig config, Rng& rng);

  const DistributionalConfig& config() const { return config_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  int obs_dim() const { return obs_dim_; }
  int num_tasks() const { return num_tasks_; }

  Vector bin_centers() const;
  /// Projection of a return onto its two nearest bins; clamped to the grid.
  Vector two_hot(double value) const;

  Matrix inputs(const std::vector<const State*>& states) const;
  Matrix logits(const std::vector<const State*>& states) const;
  /// sum_i z_i softmax(logits)_i per state.
  Vector values(const std::vector<const State*>& states) const;
  double value(const State& state) const;

  Checkpoint to_checkpoint() const;

 private:
  int obs_dim_;
  int num_tasks_;
  DistributionalConfig config_;
  Mlp net_;
};

/// Column-wise softmax.
Matrix softmax(const Matrix& logits);

struct ValueLoss {
  double loss = 0.0;
  Vector grads;
};

/// Mean cross-entropy between two-hot return targets and the predicted
/// distributions.
ValueLoss awr_value_loss_and_grads(const std::vector<const State*>& states, const std::vector<double>& returns,
                                   const DistributionalValueCritic& critic);
double awr_value_update(const std::vector<const State*>& states, const std::vector<double>& returns,
                        DistributionalValueCritic& critic, AdamW& opt);

/// Discounted reward-to-go of a segment's start state.
struct ReturnSample {
  std::size_t segment = 0;
  double value = 0.0;
};

/// Returns for every segment of every uncensored fragment; fragments that
/// ended in a handover or never terminated contribute nothing.
std::vector<ReturnSample> monte_carlo_returns(const ReplayBuffer& buffer, double gamma);

/// Weighted flow matching with weights from (return - V(s)). Truncated chunks
/// are skipped; noise draws follow actor_loss_and_grads.
ActorLoss awr_policy_loss_and_grads(const SegmentBatch& batch, const std::vector<double>& returns,
                                    const DistributionalValueCritic& critic, const FlowPolicy& policy, Rng& rng);
double awr_policy_update(const SegmentBatch& batch, const std::vector<double>& returns,
                         const DistributionalValueCritic& critic, FlowPolicy& policy, AdamW& opt, Rng& rng);

struct AwrStats {
  double value_loss = 0.0;
  double policy_loss = 0.0;
  std::size_t return_samples = 0;
};

/// critic_steps value updates then actor_steps policy updates, both on
/// uniform batches of uncensored return samples.
AwrStats train_awr_iteration(const ReplayBuffer& buffer, DistributionalValueCritic& critic, AdamW& value_opt,
                             FlowPolicy& policy, AdamW& actor_opt, const IterationConfig& config, double gamma,
                             Rng& rng);

}  // namespace aloe
