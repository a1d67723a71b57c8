#include "aloe/chain_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aloe {

Vector ActionBounds::clip(const Vector& action) const {
  return action.cwiseMax(low).cwiseMin(high);
}

bool ActionBounds::contains(const Vector& action) const {
  return (action.array() >= low.array()).all() && (action.array() <= high.array()).all();
}

Matrix ActionBounds::clip_rows(const Matrix& actions) const {
  Matrix out = actions;
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    out.row(t) = clip(out.row(t).transpose()).transpose();
  }
  return out;
}

void ChainMdp::validate() const {
  if (n_states < 3) throw std::invalid_argument("ChainMdp: n_states must be >= 3");
  auto in_range = [&](int s) { return s >= 0 && s < n_states; };
  if (!in_range(goal_state) || !in_range(start_state)) {
    throw std::invalid_argument("ChainMdp: state index out of range");
  }
  for (int t : trap_states) {
    if (!in_range(t)) throw std::invalid_argument("ChainMdp: trap state out of range");
    if (t == goal_state) throw std::invalid_argument("ChainMdp: goal and trap states overlap");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ChainMdp: gamma outside [0, 1)");
  if (c_fail <= 0.0) throw std::invalid_argument("ChainMdp: c_fail must be positive");
  if (max_steps < 1) throw std::invalid_argument("ChainMdp: max_steps must be positive");
}

bool ChainMdp::is_trap(int s) const {
  return std::find(trap_states.begin(), trap_states.end(), s) != trap_states.end();
}

int ChainMdp::next(int s, int action) const {
  const int moved = action == 1 ? s + 1 : s - 1;
  return std::clamp(moved, 0, n_states - 1);
}

int chain_action_index(double a) { return a >= 0.0 ? 1 : 0; }
double chain_action_value(int action) { return action == 1 ? 1.0 : -1.0; }

int chain_chunk_count(int horizon) {
  if (horizon < 1 || horizon > 16) throw std::invalid_argument("chain chunk horizon outside [1, 16]");
  return 1 << horizon;
}

ActionChunk chain_chunk(int code, int horizon) {
  if (code < 0 || code >= chain_chunk_count(horizon)) throw std::out_of_range("chunk code");
  Matrix a(horizon, 1);
  for (int k = 0; k < horizon; ++k) a(k, 0) = chain_action_value((code >> (horizon - 1 - k)) & 1);
  return ActionChunk(std::move(a));
}

int chain_chunk_code(const ActionChunk& chunk) {
  int code = 0;
  for (int k = 0; k < chunk.horizon(); ++k) code = (code << 1) | chain_action_index(chunk.actions(k, 0));
  return code;
}

int chain_state_index(const State& state) {
  Eigen::Index idx = 0;
  state.obs.maxCoeff(&idx);
  return static_cast<int>(idx);
}

State chain_state(const ChainMdp& mdp, int s) {
  State st;
  st.obs = Vector::Zero(mdp.n_states);
  st.obs[s] = 1.0;
  st.task_id = 0;
  return st;
}

ChainChunkOutcome simulate_chain_chunk(const ChainMdp& mdp, int s, int code, int horizon) {
  const ActionChunk chunk = chain_chunk(code, horizon);
  const RewardSpec spec = mdp.reward_spec();
  ChainChunkOutcome out;
  int pos = s;
  for (int k = 0; k < horizon; ++k) {
    pos = mdp.next(pos, chain_action_index(chunk.actions(k, 0)));
    const bool success = mdp.is_goal(pos);
    const bool failure = mdp.is_trap(pos);
    out.rewards.push_back(step_reward(success, failure, success || failure, spec));
    if (success || failure) {
      out.terminated = true;
      out.success = success;
      break;
    }
  }
  out.next_state = pos;
  return out;
}

TransitionSegment chain_segment(const ChainMdp& mdp, int s, int code, int horizon) {
  const ChainChunkOutcome o = simulate_chain_chunk(mdp, s, code, horizon);
  TransitionSegment seg;
  seg.state = chain_state(mdp, s);
  seg.chunk = ActionChunk(chain_chunk(code, horizon).actions, static_cast<int>(o.rewards.size()));
  seg.rewards = o.rewards;
  seg.next_state = chain_state(mdp, o.next_state);
  seg.terminated = o.terminated;
  seg.success = o.success;
  return seg;
}

ChunkPolicyTable ChunkPolicyTable::deterministic(const std::vector<int>& codes, int horizon) {
  ChunkPolicyTable table;
  table.horizon = horizon;
  const int n = chain_chunk_count(horizon);
  for (int code : codes) {
    std::vector<double> p(n, 0.0);
    p.at(code) = 1.0;
    table.probs.push_back(std::move(p));
  }
  return table;
}

ChunkPolicyTable ChunkPolicyTable::uniform(int n_states, int horizon) {
  ChunkPolicyTable table;
  table.horizon = horizon;
  const int n = chain_chunk_count(horizon);
  table.probs.assign(n_states, std::vector<double>(n, 1.0 / n));
  return table;
}

void ChunkPolicyTable::validate(const ChainMdp& mdp) const {
  if (static_cast<int>(probs.size()) != mdp.n_states) {
    throw std::invalid_argument("policy table row count differs from n_states");
  }
  const int n = chain_chunk_count(horizon);
  for (const auto& row : probs) {
    if (static_cast<int>(row.size()) != n) throw std::invalid_argument("policy table width");
    double total = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("negative policy probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("policy row does not sum to 1");
  }
}

ActionChunk ChunkPolicyTable::sample(const State& state, Rng& rng) const {
  const auto& row = probs.at(chain_state_index(state));
  std::discrete_distribution<int> dist(row.begin(), row.end());
  return chain_chunk(dist(rng), horizon);
}

namespace {

struct ChunkModel {
  std::vector<std::vector<ChainChunkOutcome>> outcomes;  // [s][code]
  std::vector<std::vector<double>> returns;              // discounted in-chunk reward
};

ChunkModel build_chunk_model(const ChainMdp& mdp, int horizon) {
  const int n = chain_chunk_count(horizon);
  ChunkModel m;
  m.outcomes.resize(mdp.n_states);
  m.returns.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int c = 0; c < n; ++c) {
      m.outcomes[s].push_back(simulate_chain_chunk(mdp, s, c, horizon));
      m.returns[s].push_back(discounted_sum(m.outcomes[s].back().rewards, mdp.gamma));
    }
  }
  return m;
}

Matrix bellman_backup(const ChainMdp& mdp, const ChunkPolicyTable& policy, const ChunkModel& m,
                      const Matrix& q) {
  const int n = chain_chunk_count(policy.horizon);
  Vector v = Vector::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int c = 0; c < n; ++c) v[s] += policy.probs[s][c] * q(s, c);
  }
  Matrix out = Matrix::Zero(mdp.n_states, n);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int c = 0; c < n; ++c) {
      const auto& o = m.outcomes[s][c];
      const double bootstrap =
          o.terminated ? 0.0 : std::pow(mdp.gamma, static_cast<double>(o.rewards.size())) * v[o.next_state];
      out(s, c) = m.returns[s][c] + bootstrap;
    }
  }
  return out;
}

}  // namespace

Matrix value_iteration_oracle(const ChainMdp& mdp, const ChunkPolicyTable& policy,
                              double tolerance, int max_iterations) {
  mdp.validate();
  policy.validate(mdp);
  const ChunkModel model = build_chunk_model(mdp, policy.horizon);
  Matrix q = Matrix::Zero(mdp.n_states, chain_chunk_count(policy.horizon));
  for (int it = 0; it < max_iterations; ++it) {
    Matrix next = bellman_backup(mdp, policy, model, q);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (change <= tolerance) return q;
  }
  throw std::runtime_error("value_iteration_oracle: no convergence within the iteration cap");
}

double chain_bellman_residual(const ChainMdp& mdp, const ChunkPolicyTable& policy,
                              const Matrix& q) {
  const ChunkModel model = build_chunk_model(mdp, policy.horizon);
  return (bellman_backup(mdp, policy, model, q) - q).cwiseAbs().maxCoeff();
}

ChainEnv::ChainEnv(ChainMdp mdp) : mdp_(std::move(mdp)) {
  mdp_.validate();
  bounds_.low = Vector::Constant(1, -1.0);
  bounds_.high = Vector::Constant(1, 1.0);
}

State ChainEnv::reset(std::uint64_t /*seed*/) {
  position_ = mdp_.start_state;
  state_ = chain_state(mdp_, position_);
  steps_ = 0;
  done_ = mdp_.is_terminal(position_);
  return state_;
}

StepResult ChainEnv::step(const Vector& action) {
  if (done_) throw EnvironmentError("ChainEnv: step on a terminated episode");
  const Vector a = bounds_.clip(action);
  position_ = mdp_.next(position_, chain_action_index(a[0]));
  ++steps_;
  const bool success = mdp_.is_goal(position_);
  const bool failure = mdp_.is_trap(position_) || (!success && steps_ >= mdp_.max_steps);
  done_ = success || failure;
  state_ = chain_state(mdp_, position_);
  return StepResult{state_, step_reward(success, failure, done_, mdp_.reward_spec()), done_, success};
}

double ChainEnv::progress(const State& state) const {
  const int s = chain_state_index(state);
  const double span = std::max(1, std::abs(mdp_.goal_state - mdp_.start_state));
  return std::clamp(1.0 - std::abs(mdp_.goal_state - s) / span, 0.0, 1.0);
}

std::unique_ptr<Environment> ChainEnv::clone() const { return std::make_unique<ChainEnv>(*this); }

}  // namespace aloe
