#include "aloe/critic.hpp"

#include "aloe/chain_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aloe {

SegmentBatch as_batch(const std::vector<TransitionSegment>& segments) {
  SegmentBatch batch;
  batch.reserve(segments.size());
  for (const auto& s : segments) batch.push_back(&s);
  return batch;
}

int CriticFeatures::input_dim() const {
  switch (kind) {
    case Kind::Concat: return obs_dim + horizon * action_dim + num_tasks;
    case Kind::ChainTabular: return obs_dim * chain_chunk_count(horizon);
  }
  return 0;
}

void CriticFeatures::encode(const State& state, const ActionChunk& chunk, Eigen::Ref<Vector> out) const {
  if (state.obs.size() != obs_dim) throw std::invalid_argument("critic features: observation dimension mismatch");
  if (chunk.horizon() != horizon || chunk.action_dim() != action_dim) {
    throw std::invalid_argument("critic features: chunk shape mismatch");
  }
  out.setZero();
  if (kind == Kind::ChainTabular) {
    const int codes = chain_chunk_count(horizon);
    out[chain_state_index(state) * codes + chain_chunk_code(chunk)] = 1.0;
    return;
  }
  if (state.task_id < 0 || state.task_id >= num_tasks) throw std::invalid_argument("critic features: task id");
  out.head(obs_dim) = state.obs;
  out.segment(obs_dim, horizon * action_dim) = chunk.flattened();
  out[obs_dim + horizon * action_dim + state.task_id] = 1.0;
}

Matrix CriticFeatures::encode_batch(const std::vector<const State*>& states,
                                    const std::vector<const ActionChunk*>& chunks) const {
  if (states.size() != chunks.size()) throw std::invalid_argument("critic features: batch size mismatch");
  Matrix x(input_dim(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t j = 0; j < states.size(); ++j) encode(*states[j], *chunks[j], x.col(static_cast<Eigen::Index>(j)));
  return x;
}

void CriticConfig::validate() const {
  if (ensemble_size < 1) throw std::invalid_argument("critic: ensemble_size must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("critic: gamma outside [0, 1)");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw std::invalid_argument("critic: polyak outside [0, 1]");
  if (n_next_samples < 1) throw std::invalid_argument("critic: n_next_samples must be >= 1");
  if (!(value_scale > 0.0)) throw std::invalid_argument("critic: value_scale must be positive");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("critic: hidden widths must be positive");
  }
}

EnsembleCritic::EnsembleCritic(CriticFeatures features, CriticConfig config, Rng& rng)
    : features_(features), config_(std::move(config)) {
  config_.validate();
  std::vector<int> widths{features_.input_dim()};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(1);
  for (int i = 0; i < config_.ensemble_size; ++i) {
    online_.emplace_back(widths, config_.activation, rng);
    target_.push_back(online_.back());
  }
}

std::vector<Vector*> EnsembleCritic::online_params() {
  std::vector<Vector*> out;
  for (auto& net : online_) out.push_back(&net.params());
  return out;
}

std::vector<const Vector*> EnsembleCritic::online_params() const {
  std::vector<const Vector*> out;
  for (const auto& net : online_) out.push_back(&net.params());
  return out;
}

Matrix EnsembleCritic::member_values(const Matrix& inputs, bool use_target) const {
  const auto& nets = use_target ? target_ : online_;
  Matrix out(size(), inputs.cols());
  for (int i = 0; i < size(); ++i) out.row(i) = config_.value_scale * nets[i].forward(inputs).row(0);
  return out;
}

std::vector<double> EnsembleCritic::member_values(const State& state, const ActionChunk& chunk,
                                                  bool use_target) const {
  Vector x(features_.input_dim());
  features_.encode(state, chunk, x);
  const Matrix q = member_values(Matrix(x), use_target);
  return std::vector<double>(q.data(), q.data() + q.size());
}

double EnsembleCritic::pessimistic_q(const State& state, const ActionChunk& chunk, bool use_target) const {
  if (!chunk.full()) throw std::invalid_argument("pessimistic_q: truncated chunk");
  const auto q = member_values(state, chunk, use_target);
  return *std::min_element(q.begin(), q.end());
}

Vector EnsembleCritic::pessimistic_q(const std::vector<const State*>& states,
                                     const std::vector<const ActionChunk*>& chunks, bool use_target) const {
  for (const auto* c : chunks) {
    if (!c->full()) throw std::invalid_argument("pessimistic_q: truncated chunk");
  }
  return member_values(features_.encode_batch(states, chunks), use_target).colwise().minCoeff().transpose();
}

Vector EnsembleCritic::target_aggregate(const std::vector<const State*>& states,
                                        const std::vector<const ActionChunk*>& chunks) const {
  const Matrix q = member_values(features_.encode_batch(states, chunks), true);
  if (config_.pessimistic_targets) return q.colwise().minCoeff().transpose();
  return q.colwise().mean().transpose();
}

void EnsembleCritic::polyak_update() {
  const double w = config_.polyak;
  for (int i = 0; i < size(); ++i) {
    target_[i].params() = w * online_[i].params() + (1.0 - w) * target_[i].params();
  }
}

Checkpoint EnsembleCritic::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "critic";
  ckpt.meta["K"] = config_.ensemble_size;
  ckpt.meta["h"] = features_.horizon;
  ckpt.meta["d"] = features_.action_dim;
  ckpt.meta["obs_dim"] = features_.obs_dim;
  ckpt.meta["num_tasks"] = features_.num_tasks;
  ckpt.meta["features"] = features_.kind == CriticFeatures::Kind::Concat ? "concat" : "chain_tabular";
  ckpt.meta["gamma"] = config_.gamma;
  ckpt.meta["polyak"] = config_.polyak;
  ckpt.meta["n_next_samples"] = config_.n_next_samples;
  ckpt.meta["pessimistic_targets"] = config_.pessimistic_targets;
  ckpt.meta["value_scale"] = config_.value_scale;
  for (int i = 0; i < size(); ++i) {
    ckpt.nets.emplace_back("online." + std::to_string(i), online_[i]);
    ckpt.nets.emplace_back("target." + std::to_string(i), target_[i]);
  }
  return ckpt;
}

EnsembleCritic EnsembleCritic::from_checkpoint(const Checkpoint& ckpt) {
  const auto& m = ckpt.meta;
  if (m.value("kind", "") != "critic") throw std::invalid_argument("checkpoint does not hold a critic");
  EnsembleCritic c;
  c.features_.kind = m.at("features").get<std::string>() == "concat" ? CriticFeatures::Kind::Concat
                                                                    : CriticFeatures::Kind::ChainTabular;
  c.features_.horizon = m.at("h");
  c.features_.action_dim = m.at("d");
  c.features_.obs_dim = m.at("obs_dim");
  c.features_.num_tasks = m.at("num_tasks");
  c.config_.ensemble_size = m.at("K");
  c.config_.gamma = m.at("gamma");
  c.config_.polyak = m.at("polyak");
  c.config_.n_next_samples = m.at("n_next_samples");
  c.config_.pessimistic_targets = m.at("pessimistic_targets");
  c.config_.value_scale = m.at("value_scale");
  for (int i = 0; i < c.config_.ensemble_size; ++i) {
    c.online_.push_back(ckpt.net("online." + std::to_string(i)));
    c.target_.push_back(ckpt.net("target." + std::to_string(i)));
  }
  const auto& w = c.online_.front().widths();
  c.config_.hidden.assign(w.begin() + 1, w.end() - 1);
  c.config_.activation = c.online_.front().activation();
  if (w.front() != c.features_.input_dim()) throw std::invalid_argument("critic checkpoint: input width mismatch");
  return c;
}

std::vector<double> td_chunk_targets(const SegmentBatch& batch, const ChunkSampler& sampler,
                                     const EnsembleCritic& critic, int n_next_samples, Rng& rng) {
  if (n_next_samples < 1) throw std::invalid_argument("td_chunk_target: n_next_samples must be >= 1");
  const double gamma = critic.config().gamma;
  std::vector<double> y(batch.size(), 0.0);
  std::vector<std::size_t> open;
  std::vector<State> next_states;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const TransitionSegment& seg = *batch[j];
    if (static_cast<int>(seg.rewards.size()) != seg.chunk.valid_len) {
      throw std::invalid_argument("td_chunk_target: rewards length differs from valid_len");
    }
    y[j] = discounted_sum(seg.rewards, gamma);
    if (!seg.terminated) {
      open.push_back(j);
      next_states.push_back(seg.next_state);
    }
  }
  if (open.empty()) return y;

  std::vector<const State*> state_ptrs;
  for (const auto& s : next_states) state_ptrs.push_back(&s);
  Vector bootstrap = Vector::Zero(static_cast<Eigen::Index>(open.size()));
  for (int k = 0; k < n_next_samples; ++k) {
    const std::vector<ActionChunk> next = sampler(next_states, rng);
    if (next.size() != next_states.size()) throw std::logic_error("chunk sampler returned the wrong count");
    std::vector<const ActionChunk*> chunk_ptrs;
    for (const auto& c : next) chunk_ptrs.push_back(&c);
    bootstrap += critic.target_aggregate(state_ptrs, chunk_ptrs);
  }
  bootstrap /= n_next_samples;
  for (std::size_t i = 0; i < open.size(); ++i) {
    const int len = batch[open[i]]->chunk.valid_len;
    y[open[i]] += std::pow(gamma, len) * bootstrap[static_cast<Eigen::Index>(i)];
  }
  return y;
}

double td_chunk_target(const TransitionSegment& segment, const ChunkSampler& sampler,
                       const EnsembleCritic& critic, int n_next_samples, Rng& rng) {
  return td_chunk_targets(SegmentBatch{&segment}, sampler, critic, n_next_samples, rng).front();
}

CriticLoss critic_loss_and_grads(const SegmentBatch& batch, const std::vector<double>& targets,
                                 const EnsembleCritic& critic) {
  if (batch.size() != targets.size()) throw std::invalid_argument("critic loss: one target per segment");
  if (batch.empty()) throw std::invalid_argument("critic loss: empty batch");
  std::vector<const State*> states;
  std::vector<const ActionChunk*> chunks;
  for (const auto* s : batch) {
    states.push_back(&s->state);
    chunks.push_back(&s->chunk);
  }
  const Matrix x = critic.features().encode_batch(states, chunks);
  const Eigen::Map<const Eigen::RowVectorXd> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const double k = critic.size();
  const double b = static_cast<double>(batch.size());
  const double scale = critic.config().value_scale;

  CriticLoss out;
  for (const auto& net : critic.online()) {
    Mlp::Tape tape;
    const Eigen::RowVectorXd q = scale * net.forward(x, tape).row(0);
    const Eigen::RowVectorXd residual = q - y;
    out.loss += residual.squaredNorm() / (b * k);
    Vector g = Vector::Zero(static_cast<Eigen::Index>(net.num_params()));
    net.backward(tape, Matrix(residual * (2.0 * scale / (b * k))), g);
    out.grads.push_back(std::move(g));
  }
  return out;
}

}  // namespace aloe
