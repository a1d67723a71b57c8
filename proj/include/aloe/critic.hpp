#pragma once

// Ensemble of chunked action-value networks with Polyak-averaged targets,
// Q-chunking TD targets and pessimistic (minimum) aggregation.

#include "aloe/checkpoint.hpp"
#include "aloe/core.hpp"
#include "aloe/mlp.hpp"

#include <functional>
#include <vector>

namespace aloe {

using SegmentBatch = std::vector<const TransitionSegment*>;
SegmentBatch as_batch(const std::vector<TransitionSegment>& segments);

/// Draws one action chunk per state (e.g. from the current policy).
using ChunkSampler = std::function<std::vector<ActionChunk>(const std::vector<State>& states, Rng& rng)>;

/// How (state, chunk) pairs are encoded as network inputs.
struct CriticFeatures {
  enum class Kind {
    Concat,        // obs ++ flattened chunk ++ task one-hot
    ChainTabular,  // one-hot over (argmax obs, discrete chunk code)
  };
  Kind kind = Kind::Concat;
  int obs_dim = 1;
  int horizon = 1;
  int action_dim = 1;
  int num_tasks = 1;

  int input_dim() const;
  void encode(const State& state, const ActionChunk& chunk, Eigen::Ref<Vector> out) const;
  Matrix encode_batch(const std::vector<const State*>& states,
                      const std::vector<const ActionChunk*>& chunks) const;
};

struct CriticConfig {
  int ensemble_size = 5;
  double gamma = 0.99;
  double polyak = 0.005;
  int n_next_samples = 4;
  bool pessimistic_targets = true;
  std::vector<int> hidden{256, 256};
  Activation activation = Activation::ReLU;
  // Q = value_scale * net(x); lets unit-scale networks fit returns of order c_fail.
  double value_scale = 1.0;

  void validate() const;
};

class EnsembleCritic {
 public:
  EnsembleCritic(CriticFeatures features, CriticConfig config, Rng& rng);

  int size() const { return static_cast<int>(online_.size()); }
  const CriticConfig& config() const { return config_; }
  const CriticFeatures& features() const { return features_; }

  std::vector<Mlp>& online() { return online_; }
  const std::vector<Mlp>& online() const { return online_; }
  std::vector<Mlp>& target() { return target_; }
  const std::vector<Mlp>& target() const { return target_; }
  std::vector<Vector*> online_params();
  std::vector<const Vector*> online_params() const;

  /// K x B matrix of member predictions for encoded inputs.
  Matrix member_values(const Matrix& inputs, bool use_target) const;
  std::vector<double> member_values(const State& state, const ActionChunk& chunk,
                                    bool use_target) const;

  /// min_i Q_i(s, a). Rejects truncated chunks.
  double pessimistic_q(const State& state, const ActionChunk& chunk, bool use_target) const;
  Vector pessimistic_q(const std::vector<const State*>& states,
                       const std::vector<const ActionChunk*>& chunks, bool use_target) const;
  /// Aggregate used for bootstrapping: min, or mean when pessimistic
  /// targets are disabled.
  Vector target_aggregate(const std::vector<const State*>& states,
                          const std::vector<const ActionChunk*>& chunks) const;

  /// target <- w * online + (1 - w) * target, for every member.
  void polyak_update();

  Checkpoint to_checkpoint() const;
  static EnsembleCritic from_checkpoint(const Checkpoint& checkpoint);

 private:
  EnsembleCritic() = default;

  CriticFeatures features_;
  CriticConfig config_;
  std::vector<Mlp> online_;
  std::vector<Mlp> target_;
};

/// sum_{k<L} gamma^k r_k + [not terminated] gamma^L * mean over samples of
/// the target-ensemble aggregate at (s_{t+L}, a'), a' ~ sampler.
double td_chunk_target(const TransitionSegment& segment, const ChunkSampler& sampler,
                       const EnsembleCritic& critic, int n_next_samples, Rng& rng);
std::vector<double> td_chunk_targets(const SegmentBatch& batch, const ChunkSampler& sampler,
                                     const EnsembleCritic& critic, int n_next_samples, Rng& rng);

struct CriticLoss {
  double loss = 0.0;
  std::vector<Vector> grads;  // one block per online member
};

/// (1/K) sum_i mean_batch (Q_i(s, a) - y)^2 and its gradient with respect
/// to the online parameters.
CriticLoss critic_loss_and_grads(const SegmentBatch& batch, const std::vector<double>& targets,
                                 const EnsembleCritic& critic);

}  // namespace aloe
