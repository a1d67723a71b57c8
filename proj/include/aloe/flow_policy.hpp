#pragma once

// Flow-matching chunk policy and the advantage-weighted actor update.
//
// Interpolation convention: x(eta) = eta * a + (1 - eta) * eps, so eta = 0 is
// pure noise. The velocity net f regresses eps - a; sampling integrates
// x <- x - f(x, s, eta) / N from eta = 0 to eta = 1.

#include "aloe/checkpoint.hpp"
#include "aloe/critic.hpp"
#include "aloe/environment.hpp"

#include <vector>

namespace aloe {

struct FlowConfig {
  int horizon = 1;
  int action_dim = 1;
  int integration_steps = 8;
  double beta = 1.0;
  double eps_clip = 2.0;
  int n_value_samples = 4;
  std::vector<int> hidden{256, 256, 256};
  Activation activation = Activation::GELU;

  void validate() const;
};

class FlowPolicy {
 public:
  FlowPolicy(int obs_dim, int num_tasks, ActionBounds bounds, FlowConfig config, Rng& rng);

  const FlowConfig& config() const { return config_; }
  FlowConfig& mutable_config() { return config_; }
  int obs_dim() const { return obs_dim_; }
  int num_tasks() const { return num_tasks_; }
  int chunk_size() const { return config_.horizon * config_.action_dim; }
  const ActionBounds& bounds() const { return bounds_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  /// Network inputs: noised flat chunk ++ obs ++ task one-hot ++ eta.
  Matrix inputs(const Matrix& noised, const std::vector<const State*>& states, const Vector& etas) const;
  /// Velocity for a batch of flat noised chunks (columns).
  Matrix velocity(const Matrix& noised, const std::vector<const State*>& states, const Vector& etas) const;

  ActionChunk sample_chunk(const State& state, Rng& rng) const;
  std::vector<ActionChunk> sample_chunks(const std::vector<State>& states, Rng& rng) const;
  std::vector<ActionChunk> sample_chunks(const std::vector<const State*>& states, Rng& rng) const;
  /// Euler integration from the given flat noise columns, then clipping.
  std::vector<ActionChunk> integrate(const Matrix& noise, const std::vector<const State*>& states) const;

  /// || eps - a - f(eta * a + (1 - eta) * eps, s, eta) ||^2 over all h x d entries.
  double flow_matching_residual(const State& state, const ActionChunk& chunk, double eta,
                                const Matrix& noise) const;

  ChunkSampler sampler() const;

  Checkpoint to_checkpoint() const;
  static FlowPolicy from_checkpoint(const Checkpoint& checkpoint, ActionBounds bounds);

 private:
  FlowPolicy() = default;

  int obs_dim_ = 0;
  int num_tasks_ = 1;
  ActionBounds bounds_;
  FlowConfig config_;
  Mlp net_;
};

/// Q_pess(s, a) on the online ensemble minus the mean Q_pess of
/// `n_value_samples` policy chunks at s.
double advantage(const State& state, const ActionChunk& chunk, const EnsembleCritic& critic,
                 const FlowPolicy& policy, int n_value_samples, Rng& rng);
std::vector<double> advantages(const SegmentBatch& batch, const EnsembleCritic& critic,
                               const FlowPolicy& policy, int n_value_samples, Rng& rng);

/// exp(clip(adv / beta, -eps_clip, eps_clip)).
double advantage_weight(double adv, double beta, double eps_clip);

struct ActorLoss {
  double loss = 0.0;
  Vector grads;
  std::vector<double> weights;
  std::size_t used = 0;  // full-chunk segments that entered the loss
};

/// Segments of the batch whose chunks are full.
SegmentBatch full_chunks(const SegmentBatch& batch);

/// mean_j w_j * residual_j with one fresh (eta, eps) draw per segment.
/// `batch` must contain only full chunks.
ActorLoss weighted_flow_loss(const FlowPolicy& policy, const SegmentBatch& batch,
                             const std::vector<double>& weights, Rng& noise_rng);

/// Advantage-weighted flow-matching loss. Truncated chunks are skipped. The
/// first draw of `rng` seeds the flow noise, the second the value samples,
/// so a BC step with the same seed sees the same (eta, eps).
ActorLoss actor_loss_and_grads(const SegmentBatch& batch, const EnsembleCritic& critic,
                               const FlowPolicy& policy, Rng& rng);

/// Unweighted flow-matching loss with the same noise draws as
/// actor_loss_and_grads.
ActorLoss bc_loss_and_grads(const SegmentBatch& batch, const FlowPolicy& policy, Rng& rng);

}  // namespace aloe
