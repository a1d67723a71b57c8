#include "aloe/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aloe {

double bc_update(const SegmentBatch& batch, FlowPolicy& policy, AdamW& opt, Rng& rng) {
  ActorLoss loss = bc_loss_and_grads(batch, policy, rng);
  if (loss.used == 0) return 0.0;
  if (!std::isfinite(loss.loss)) throw NumericalError("bc_update: non-finite loss");
  opt.step({&policy.net().params()}, {std::move(loss.grads)});
  return loss.loss;
}

double bc_train(const ReplayBuffer& dataset, FlowPolicy& policy, AdamW& opt, int steps, int batch_size, Rng& rng) {
  if (dataset.empty()) throw std::logic_error("bc_train: empty dataset");
  if (steps > 0) opt.restart_schedule(steps);
  double total = 0.0;
  for (int i = 0; i < steps; ++i) {
    const auto idx = dataset.sample_indices(static_cast<std::size_t>(batch_size), rng);
    SegmentBatch batch;
    for (std::size_t j : idx) batch.push_back(&dataset.segments()[j]);
    total += bc_update(batch, policy, opt, rng);
  }
  return steps > 0 ? total / steps : 0.0;
}

DaggerStats dagger_iteration(FlowPolicy& policy, AdamW& opt, const InterventionOracle& oracle, Environment& env,
                             ReplayBuffer& dataset, const IterationConfig& config, int iteration, Rng& rng) {
  DaggerStats stats;
  ChunkedPolicyAgent agent(policy, config.execution_chunk_len);
  stats.rollout = collect_iteration(agent, oracle, env, dataset, config, iteration, rng, FragmentFilter::InterventionOnly);
  stats.dataset_size = dataset.size();
  if (!dataset.empty()) stats.bc_loss = bc_train(dataset, policy, opt, config.actor_steps, config.batch_size, rng);
  return stats;
}

void DistributionalConfig::validate() const {
  if (bins < 2) throw std::invalid_argument("distributional critic: bins must be >= 2");
  if (!(v_min < v_max)) throw std::invalid_argument("distributional critic: v_min must be below v_max");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("distributional critic: hidden widths must be positive");
  }
}

double default_v_min(double c_fail, double gamma, int max_steps) { return -c_fail * (1.0 + gamma * max_steps); }

DistributionalValueCritic::DistributionalValueCritic(int obs_dim, int num_tasks, DistributionalConfig config,
                                                     Rng& rng)
    : obs_dim_(obs_dim), num_tasks_(num_tasks), config_(std::move(config)) {
  config_.validate();
  std::vector<int> widths{obs_dim_ + num_tasks_};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(config_.bins);
  net_ = Mlp(widths, config_.activation, rng);
}

Vector DistributionalValueCritic::bin_centers() const {
  return Vector::LinSpaced(config_.bins, config_.v_min, config_.v_max);
}

Vector DistributionalValueCritic::two_hot(double value) const {
  const int n = config_.bins;
  const double width = (config_.v_max - config_.v_min) / (n - 1);
  const double pos = (std::clamp(value, config_.v_min, config_.v_max) - config_.v_min) / width;
  const int k = std::min(static_cast<int>(std::floor(pos)), n - 2);
  const double frac = std::clamp(pos - k, 0.0, 1.0);
  Vector t = Vector::Zero(n);
  t[k] = 1.0 - frac;
  t[k + 1] = frac;
  return t;
}

Matrix DistributionalValueCritic::inputs(const std::vector<const State*>& states) const {
  Matrix x = Matrix::Zero(obs_dim_ + num_tasks_, static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) {
    const State& s = *states[j];
    if (s.obs.size() != obs_dim_) throw std::invalid_argument("value critic: observation dimension mismatch");
    if (s.task_id < 0 || s.task_id >= num_tasks_) throw std::invalid_argument("value critic: task id");
    const auto col = static_cast<Eigen::Index>(j);
    x.block(0, col, obs_dim_, 1) = s.obs;
    x(obs_dim_ + s.task_id, col) = 1.0;
  }
  return x;
}

Matrix DistributionalValueCritic::logits(const std::vector<const State*>& states) const {
  return net_.forward(inputs(states));
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    p.col(j).array() = (p.col(j).array() - p.col(j).maxCoeff()).exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

Vector DistributionalValueCritic::values(const std::vector<const State*>& states) const {
  return (bin_centers().transpose() * softmax(logits(states))).transpose();
}

double DistributionalValueCritic::value(const State& state) const { return values({&state})[0]; }

Checkpoint DistributionalValueCritic::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "value";
  ckpt.meta["bins"] = config_.bins;
  ckpt.meta["v_min"] = config_.v_min;
  ckpt.meta["v_max"] = config_.v_max;
  ckpt.meta["obs_dim"] = obs_dim_;
  ckpt.meta["num_tasks"] = num_tasks_;
  ckpt.nets.emplace_back("value", net_);
  return ckpt;
}

ValueLoss awr_value_loss_and_grads(const std::vector<const State*>& states, const std::vector<double>& returns,
                                   const DistributionalValueCritic& critic) {
  if (states.size() != returns.size()) throw std::invalid_argument("value loss: one return per state");
  if (states.empty()) throw std::invalid_argument("value loss: empty batch");
  const auto b = static_cast<Eigen::Index>(states.size());
  Mlp::Tape tape;
  const Matrix z = critic.net().forward(critic.inputs(states), tape);
  Matrix target(z.rows(), b);
  for (Eigen::Index j = 0; j < b; ++j) target.col(j) = critic.two_hot(returns[static_cast<std::size_t>(j)]);

  ValueLoss out;
  Matrix upstream(z.rows(), b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const double m = z.col(j).maxCoeff();
    const double log_norm = m + std::log((z.col(j).array() - m).exp().sum());
    const Vector log_p = z.col(j).array() - log_norm;
    out.loss -= target.col(j).dot(log_p) / static_cast<double>(b);
    upstream.col(j) = (log_p.array().exp().matrix() - target.col(j)) / static_cast<double>(b);
  }
  out.grads = Vector::Zero(static_cast<Eigen::Index>(critic.net().num_params()));
  critic.net().backward(tape, upstream, out.grads);
  return out;
}

double awr_value_update(const std::vector<const State*>& states, const std::vector<double>& returns,
                        DistributionalValueCritic& critic, AdamW& opt) {
  ValueLoss loss = awr_value_loss_and_grads(states, returns, critic);
  if (!std::isfinite(loss.loss)) throw NumericalError("awr_value_update: non-finite loss");
  opt.step({&critic.net().params()}, {std::move(loss.grads)});
  return loss.loss;
}

std::vector<ReturnSample> monte_carlo_returns(const ReplayBuffer& buffer, double gamma) {
  std::vector<ReturnSample> out;
  const auto& segs = buffer.segments();
  for (const auto& span : buffer.episodes()) {
    if (span.censored || span.count == 0) continue;
    std::vector<ReturnSample> fragment(span.count);
    double g = 0.0;
    for (std::size_t k = span.count; k-- > 0;) {
      const TransitionSegment& seg = segs[span.first + k];
      g = discounted_sum(seg.rewards, gamma) + std::pow(gamma, seg.chunk.valid_len) * g;
      fragment[k] = ReturnSample{span.first + k, g};
    }
    out.insert(out.end(), fragment.begin(), fragment.end());
  }
  return out;
}

ActorLoss awr_policy_loss_and_grads(const SegmentBatch& batch, const std::vector<double>& returns,
                                    const DistributionalValueCritic& critic, const FlowPolicy& policy, Rng& rng) {
  if (batch.size() != returns.size()) throw std::invalid_argument("awr policy loss: one return per segment");
  Rng noise_rng(rng());
  rng();
  SegmentBatch full;
  std::vector<double> full_returns;
  std::vector<const State*> states;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (!batch[j]->chunk.full()) continue;
    full.push_back(batch[j]);
    full_returns.push_back(returns[j]);
    states.push_back(&batch[j]->state);
  }
  std::vector<double> w(full.size());
  if (!full.empty()) {
    const Vector v = critic.values(states);
    const auto& cfg = policy.config();
    for (std::size_t j = 0; j < full.size(); ++j) {
      w[j] = advantage_weight(full_returns[j] - v[static_cast<Eigen::Index>(j)], cfg.beta, cfg.eps_clip);
    }
  }
  return weighted_flow_loss(policy, full, w, noise_rng);
}

double awr_policy_update(const SegmentBatch& batch, const std::vector<double>& returns,
                         const DistributionalValueCritic& critic, FlowPolicy& policy, AdamW& opt, Rng& rng) {
  ActorLoss loss = awr_policy_loss_and_grads(batch, returns, critic, policy, rng);
  if (loss.used == 0) return 0.0;
  if (!std::isfinite(loss.loss)) throw NumericalError("awr_policy_update: non-finite loss");
  opt.step({&policy.net().params()}, {std::move(loss.grads)});
  return loss.loss;
}

AwrStats train_awr_iteration(const ReplayBuffer& buffer, DistributionalValueCritic& critic, AdamW& value_opt,
                             FlowPolicy& policy, AdamW& actor_opt, const IterationConfig& config, double gamma,
                             Rng& rng) {
  config.validate();
  AwrStats stats;
  const std::vector<ReturnSample> samples = monte_carlo_returns(buffer, gamma);
  stats.return_samples = samples.size();
  if (samples.empty()) return stats;
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  const auto b = static_cast<std::size_t>(config.batch_size);

  if (config.critic_steps > 0) value_opt.restart_schedule(config.critic_steps);
  for (int step = 0; step < config.critic_steps; ++step) {
    std::vector<const State*> states;
    std::vector<double> returns;
    for (std::size_t j = 0; j < b; ++j) {
      const ReturnSample& r = samples[pick(rng)];
      states.push_back(&buffer.segments()[r.segment].state);
      returns.push_back(r.value);
    }
    stats.value_loss += awr_value_update(states, returns, critic, value_opt) / config.critic_steps;
  }

  if (config.actor_steps > 0) actor_opt.restart_schedule(config.actor_steps);
  for (int step = 0; step < config.actor_steps; ++step) {
    SegmentBatch batch;
    std::vector<double> returns;
    for (std::size_t j = 0; j < b; ++j) {
      const ReturnSample& r = samples[pick(rng)];
      batch.push_back(&buffer.segments()[r.segment]);
      returns.push_back(r.value);
    }
    stats.policy_loss += awr_policy_update(batch, returns, critic, policy, actor_opt, rng) / config.actor_steps;
  }
  return stats;
}

}  // namespace aloe
