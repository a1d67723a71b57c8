#include "aloe/flow_policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aloe {

void FlowConfig::validate() const {
  if (horizon < 1 || action_dim < 1) throw std::invalid_argument("flow policy: bad chunk shape");
  if (integration_steps < 1) throw std::invalid_argument("flow policy: integration_steps must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("flow policy: beta must be positive");
  if (!(eps_clip > 0.0)) throw std::invalid_argument("flow policy: eps_clip must be positive");
  if (n_value_samples < 1) throw std::invalid_argument("flow policy: n_value_samples must be >= 1");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("flow policy: hidden widths must be positive");
  }
}

FlowPolicy::FlowPolicy(int obs_dim, int num_tasks, ActionBounds bounds, FlowConfig config, Rng& rng)
    : obs_dim_(obs_dim), num_tasks_(num_tasks), bounds_(std::move(bounds)), config_(std::move(config)) {
  config_.validate();
  if (obs_dim_ < 1 || num_tasks_ < 1) throw std::invalid_argument("flow policy: bad state shape");
  if (bounds_.low.size() != config_.action_dim || bounds_.high.size() != config_.action_dim) {
    throw std::invalid_argument("flow policy: bounds dimension differs from action_dim");
  }
  std::vector<int> widths{chunk_size() + obs_dim_ + num_tasks_ + 1};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(chunk_size());
  net_ = Mlp(widths, config_.activation, rng);
}

Matrix FlowPolicy::inputs(const Matrix& noised, const std::vector<const State*>& states,
                          const Vector& etas) const {
  const auto b = static_cast<Eigen::Index>(states.size());
  if (noised.rows() != chunk_size() || noised.cols() != b || etas.size() != b) {
    throw std::invalid_argument("flow policy: input batch shape mismatch");
  }
  Matrix x = Matrix::Zero(net_.input_dim(), b);
  x.topRows(chunk_size()) = noised;
  for (Eigen::Index j = 0; j < b; ++j) {
    const State& s = *states[static_cast<std::size_t>(j)];
    if (s.obs.size() != obs_dim_) throw std::invalid_argument("flow policy: observation dimension mismatch");
    if (s.task_id < 0 || s.task_id >= num_tasks_) throw std::invalid_argument("flow policy: task id");
    x.block(chunk_size(), j, obs_dim_, 1) = s.obs;
    x(chunk_size() + obs_dim_ + s.task_id, j) = 1.0;
    x(x.rows() - 1, j) = etas[j];
  }
  return x;
}

Matrix FlowPolicy::velocity(const Matrix& noised, const std::vector<const State*>& states,
                            const Vector& etas) const {
  return net_.forward(inputs(noised, states, etas));
}

std::vector<ActionChunk> FlowPolicy::integrate(const Matrix& noise, const std::vector<const State*>& states) const {
  const int n = config_.integration_steps;
  Matrix x = noise;
  const auto b = static_cast<Eigen::Index>(states.size());
  for (int k = 0; k < n; ++k) {
    const Vector eta = Vector::Constant(b, static_cast<double>(k) / n);
    x -= velocity(x, states, eta) / n;
  }
  std::vector<ActionChunk> out;
  out.reserve(states.size());
  for (Eigen::Index j = 0; j < b; ++j) {
    ActionChunk c = ActionChunk::from_flat(x.col(j), config_.horizon, config_.action_dim);
    c.actions = bounds_.clip_rows(c.actions);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ActionChunk> FlowPolicy::sample_chunks(const std::vector<const State*>& states, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(chunk_size(), static_cast<Eigen::Index>(states.size()));
  for (Eigen::Index j = 0; j < noise.cols(); ++j) {
    for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = normal(rng);
  }
  return integrate(noise, states);
}

std::vector<ActionChunk> FlowPolicy::sample_chunks(const std::vector<State>& states, Rng& rng) const {
  std::vector<const State*> ptrs;
  ptrs.reserve(states.size());
  for (const auto& s : states) ptrs.push_back(&s);
  return sample_chunks(ptrs, rng);
}

ActionChunk FlowPolicy::sample_chunk(const State& state, Rng& rng) const {
  return sample_chunks(std::vector<const State*>{&state}, rng).front();
}

double FlowPolicy::flow_matching_residual(const State& state, const ActionChunk& chunk, double eta,
                                          const Matrix& noise) const {
  if (!chunk.full()) throw std::invalid_argument("flow_matching_residual: truncated chunk");
  if (noise.rows() != config_.horizon || noise.cols() != config_.action_dim) {
    throw std::invalid_argument("flow_matching_residual: noise shape mismatch");
  }
  const Vector a = chunk.flattened();
  const Vector eps = ActionChunk(noise).flattened();
  const Vector noised = eta * a + (1.0 - eta) * eps;
  const Vector f = velocity(Matrix(noised), {&state}, Vector::Constant(1, eta)).col(0);
  return (eps - a - f).squaredNorm();
}

ChunkSampler FlowPolicy::sampler() const {
  return [this](const std::vector<State>& states, Rng& rng) { return sample_chunks(states, rng); };
}

Checkpoint FlowPolicy::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "actor";
  ckpt.meta["h"] = config_.horizon;
  ckpt.meta["d"] = config_.action_dim;
  ckpt.meta["obs_dim"] = obs_dim_;
  ckpt.meta["num_tasks"] = num_tasks_;
  ckpt.meta["beta"] = config_.beta;
  ckpt.meta["eps_clip"] = config_.eps_clip;
  ckpt.meta["integration_steps"] = config_.integration_steps;
  ckpt.meta["n_value_samples"] = config_.n_value_samples;
  ckpt.nets.emplace_back("velocity", net_);
  return ckpt;
}

FlowPolicy FlowPolicy::from_checkpoint(const Checkpoint& ckpt, ActionBounds bounds) {
  const auto& m = ckpt.meta;
  if (m.value("kind", "") != "actor") throw std::invalid_argument("checkpoint does not hold an actor");
  FlowPolicy p;
  p.obs_dim_ = m.at("obs_dim");
  p.num_tasks_ = m.at("num_tasks");
  p.config_.horizon = m.at("h");
  p.config_.action_dim = m.at("d");
  p.config_.beta = m.at("beta");
  p.config_.eps_clip = m.at("eps_clip");
  p.config_.integration_steps = m.at("integration_steps");
  p.config_.n_value_samples = m.at("n_value_samples");
  p.net_ = ckpt.net("velocity");
  const auto& w = p.net_.widths();
  p.config_.hidden.assign(w.begin() + 1, w.end() - 1);
  p.config_.activation = p.net_.activation();
  p.config_.validate();
  if (bounds.low.size() != p.config_.action_dim) throw std::invalid_argument("actor checkpoint: bounds dimension");
  if (w.front() != p.chunk_size() + p.obs_dim_ + p.num_tasks_ + 1 || w.back() != p.chunk_size()) {
    throw std::invalid_argument("actor checkpoint: network widths do not match the chunk shape");
  }
  p.bounds_ = std::move(bounds);
  return p;
}

std::vector<double> advantages(const SegmentBatch& batch, const EnsembleCritic& critic,
                               const FlowPolicy& policy, int n_value_samples, Rng& rng) {
  if (n_value_samples < 1) throw std::invalid_argument("advantage: n_value_samples must be >= 1");
  std::vector<const State*> states;
  std::vector<const ActionChunk*> chunks;
  for (const auto* s : batch) {
    if (!s->chunk.full()) throw std::invalid_argument("advantage: truncated chunk");
    states.push_back(&s->state);
    chunks.push_back(&s->chunk);
  }
  if (states.empty()) return {};
  const Vector q = critic.pessimistic_q(states, chunks, false);
  Vector v = Vector::Zero(q.size());
  for (int k = 0; k < n_value_samples; ++k) {
    const auto sampled = policy.sample_chunks(states, rng);
    std::vector<const ActionChunk*> ptrs;
    for (const auto& c : sampled) ptrs.push_back(&c);
    v += critic.pessimistic_q(states, ptrs, false);
  }
  v /= n_value_samples;
  std::vector<double> out(states.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = q[static_cast<Eigen::Index>(j)] - v[static_cast<Eigen::Index>(j)];
  return out;
}

double advantage(const State& state, const ActionChunk& chunk, const EnsembleCritic& critic,
                 const FlowPolicy& policy, int n_value_samples, Rng& rng) {
  TransitionSegment seg;
  seg.state = state;
  seg.chunk = chunk;
  return advantages(SegmentBatch{&seg}, critic, policy, n_value_samples, rng).front();
}

double advantage_weight(double adv, double beta, double eps_clip) {
  if (!(beta > 0.0)) throw std::invalid_argument("advantage_weight: beta must be positive");
  return std::exp(std::clamp(adv / beta, -eps_clip, eps_clip));
}

SegmentBatch full_chunks(const SegmentBatch& batch) {
  SegmentBatch out;
  for (const auto* s : batch) {
    if (s->chunk.full()) out.push_back(s);
  }
  return out;
}

ActorLoss weighted_flow_loss(const FlowPolicy& policy, const SegmentBatch& batch,
                             const std::vector<double>& weights, Rng& noise_rng) {
  if (weights.size() != batch.size()) throw std::invalid_argument("flow loss: one weight per segment");
  ActorLoss out;
  out.grads = Vector::Zero(static_cast<Eigen::Index>(policy.net().num_params()));
  out.weights = weights;
  out.used = batch.size();
  if (batch.empty()) return out;

  const int n = policy.chunk_size();
  const auto b = static_cast<Eigen::Index>(batch.size());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(n, b), eps(n, b);
  Vector eta(b);
  std::vector<const State*> states;
  for (Eigen::Index j = 0; j < b; ++j) {
    const TransitionSegment& seg = *batch[static_cast<std::size_t>(j)];
    if (!seg.chunk.full()) throw std::invalid_argument("flow loss: truncated chunk");
    a.col(j) = seg.chunk.flattened();
    eta[j] = uniform(noise_rng);
    for (int i = 0; i < n; ++i) eps(i, j) = normal(noise_rng);
    states.push_back(&seg.state);
  }
  Matrix noised = a * eta.asDiagonal();
  noised += eps * (Vector::Ones(b) - eta).asDiagonal();

  Mlp::Tape tape;
  const Matrix f = policy.net().forward(policy.inputs(noised, states, eta), tape);
  const Matrix residual = eps - a - f;
  Matrix upstream(n, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const double w = weights[static_cast<std::size_t>(j)];
    out.loss += w * residual.col(j).squaredNorm() / static_cast<double>(b);
    upstream.col(j) = (-2.0 * w / static_cast<double>(b)) * residual.col(j);
  }
  policy.net().backward(tape, upstream, out.grads);
  return out;
}

ActorLoss actor_loss_and_grads(const SegmentBatch& batch, const EnsembleCritic& critic,
                               const FlowPolicy& policy, Rng& rng) {
  Rng noise_rng(rng());
  Rng value_rng(rng());
  const SegmentBatch full = full_chunks(batch);
  const auto& cfg = policy.config();
  const std::vector<double> adv = advantages(full, critic, policy, cfg.n_value_samples, value_rng);
  std::vector<double> w(adv.size());
  for (std::size_t j = 0; j < adv.size(); ++j) w[j] = advantage_weight(adv[j], cfg.beta, cfg.eps_clip);
  return weighted_flow_loss(policy, full, w, noise_rng);
}

ActorLoss bc_loss_and_grads(const SegmentBatch& batch, const FlowPolicy& policy, Rng& rng) {
  Rng noise_rng(rng());
  rng();
  const SegmentBatch full = full_chunks(batch);
  return weighted_flow_loss(policy, full, std::vector<double>(full.size(), 1.0), noise_rng);
}

}  // namespace aloe
