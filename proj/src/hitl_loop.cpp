#include "aloe/hitl_loop.hpp"

#include <cmath>
#include <sstream>
#include <utility>
#include <stdexcept>

namespace aloe {

ChunkedPolicyAgent::ChunkedPolicyAgent(const FlowPolicy& policy, int execution_len)
    : policy_(policy), execution_len_(execution_len), cursor_(execution_len) {
  if (execution_len < 1 || execution_len > policy.config().horizon) {
    throw std::invalid_argument("execution chunk length outside [1, h]");
  }
}

Vector ChunkedPolicyAgent::act(const Environment&, const State& state, Rng& rng) {
  if (cursor_ >= execution_len_) {
    plan_ = policy_.sample_chunk(state, rng);
    cursor_ = 0;
  }
  return plan_.actions.row(cursor_++).transpose();
}

Vector RandomAgent::act(const Environment& env, const State&, Rng& rng) {
  const auto& b = env.bounds();
  Vector a(b.low.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::uniform_real_distribution<double>(b.low[i], b.high[i])(rng);
  return a;
}

void IterationConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (success_quota < 1) throw std::invalid_argument("success_quota must be >= 1");
  if (max_episodes_per_iteration < success_quota) {
    throw std::invalid_argument("max_episodes_per_iteration must be >= success_quota");
  }
  const int min_steps = test_mode ? 0 : 1;
  if (critic_steps < min_steps) throw std::invalid_argument("critic_steps (N_Q) must be >= 1");
  if (actor_steps < min_steps) throw std::invalid_argument("actor_steps (N_pi) must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (execution_chunk_len < 1 || execution_chunk_len > horizon || horizon % execution_chunk_len != 0) {
    throw std::invalid_argument("execution_chunk_len must divide h");
  }
  if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
}

double RolloutStats::success_rate() const {
  return episodes == 0 ? 0.0 : static_cast<double>(policy_successes) / episodes;
}

double RolloutStats::intervention_rate() const {
  return episodes == 0 ? 0.0 : static_cast<double>(handovers) / episodes;
}

double RolloutStats::mean_length() const {
  if (episode_lengths.empty()) return 0.0;
  double total = 0.0;
  for (int l : episode_lengths) total += l;
  return total / static_cast<double>(episode_lengths.size());
}

CollectedEpisode rollout_with_oracle(Agent& agent, const InterventionOracle& oracle, Environment& env,
                                     std::uint64_t seed, Rng& rng) {
  CollectedEpisode out;
  State s = env.reset(seed);
  agent.begin_episode();
  std::vector<double> history{env.progress(s)};
  bool handover = false;
  while (!env.done()) {
    if (oracle.max_takeovers > 0 && !out.policy.steps.empty() && oracle.takeover &&
        oracle.takeover(env, s, history)) {
      handover = true;
      break;
    }
    const Vector a = env.bounds().clip(agent.act(env, s, rng));
    const StepResult r = env.step(a);
    out.policy.steps.push_back(StepRecord{s, a, r.reward, r.terminated, r.success, false, Source::PolicyRollout});
    s = r.state;
    history.push_back(env.progress(s));
  }
  out.policy.final_state = s;
  if (!handover) return out;

  // The policy fragment ends as a failure; the oracle finishes the task
  // from the same state as a separate fragment.
  StepRecord& last = out.policy.steps.back();
  last.reward = step_reward(false, true, true, env.reward_spec());
  last.terminated = true;
  last.success = false;
  last.handover = true;

  env.restart_clock();
  Episode iv;
  while (!env.done()) {
    const Vector a = env.bounds().clip(oracle.expert(env, s));
    const StepResult r = env.step(a);
    iv.steps.push_back(StepRecord{s, a, r.reward, r.terminated, r.success, false, Source::Intervention});
    s = r.state;
  }
  iv.final_state = s;
  if (!iv.steps.empty()) out.intervention = std::move(iv);
  return out;
}

RolloutStats collect_iteration(Agent& agent, const InterventionOracle& oracle, Environment& env,
                               ReplayBuffer& buffer, const IterationConfig& config, int iteration, Rng& rng,
                               FragmentFilter keep) {
  config.validate();
  RolloutStats stats;
  double return_total = 0.0;
  while (stats.completed < config.success_quota &&
         stats.episodes + stats.aborted < config.max_episodes_per_iteration) {
    const std::uint64_t seed = rng();
    Rng agent_rng(rng());
    CollectedEpisode ep;
    try {
      ep = rollout_with_oracle(agent, oracle, env, seed, agent_rng);
    } catch (const EnvironmentError&) {
      ++stats.aborted;
      continue;
    }
    ++stats.episodes;
    const StepRecord& last = ep.policy.steps.back();
    if (last.handover) {
      ++stats.handovers;
    } else if (last.success) {
      ++stats.policy_successes;
      ++stats.completed;
    } else {
      ++stats.policy_failures;
    }
    for (const auto& st : ep.policy.steps) return_total += st.reward;
    stats.policy_steps += ep.policy.steps.size();
    int length = static_cast<int>(ep.policy.steps.size());
    if (keep == FragmentFilter::All) stats.segments_added += buffer.append_episode(ep.policy, iteration);
    if (ep.intervention) {
      stats.intervention_steps += ep.intervention->steps.size();
      length += static_cast<int>(ep.intervention->steps.size());
      if (ep.intervention->steps.back().success) {
        ++stats.oracle_successes;
        ++stats.completed;
      }
      stats.segments_added += buffer.append_episode(*ep.intervention, iteration);
    }
    stats.episode_lengths.push_back(length);
  }
  if (stats.episodes > 0) stats.mean_policy_return = return_total / stats.episodes;
  return stats;
}

std::string numerical_diagnostic(const std::string& phase, int step, const std::vector<std::size_t>& indices,
                                 const std::vector<const Vector*>& params) {
  std::ostringstream out;
  out << "non-finite " << phase << " loss at step " << step << "; batch indices:";
  for (std::size_t i : indices) out << ' ' << i;
  out << "; parameter norms:";
  for (const auto* p : params) out << ' ' << p->norm();
  return out.str();
}

namespace {

SegmentBatch gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
  SegmentBatch batch;
  batch.reserve(indices.size());
  for (std::size_t i : indices) batch.push_back(&buffer.segments()[i]);
  return batch;
}

}  // namespace

TrainStats train_iteration(const ReplayBuffer& buffer, EnsembleCritic& critic, AdamW& critic_opt,
                           FlowPolicy& policy, AdamW& actor_opt, const IterationConfig& config, Rng& rng,
                           const ChunkSampler* target_sampler) {
  config.validate();
  if (buffer.empty()) throw std::logic_error("train_iteration: empty replay buffer");
  const ChunkSampler sampler = target_sampler ? *target_sampler : policy.sampler();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  TrainStats stats;

  if (config.critic_steps > 0) critic_opt.restart_schedule(config.critic_steps);
  for (int step = 0; step < config.critic_steps; ++step) {
    const auto idx = buffer.sample_indices(batch_size, rng);
    const SegmentBatch batch = gather(buffer, idx);
    const auto targets = td_chunk_targets(batch, sampler, critic, critic.config().n_next_samples, rng);
    CriticLoss loss = critic_loss_and_grads(batch, targets, critic);
    if (!std::isfinite(loss.loss)) {
      throw NumericalError(numerical_diagnostic("critic", step, idx, std::as_const(critic).online_params()));
    }
    try {
      critic_opt.step(critic.online_params(), std::move(loss.grads));
    } catch (const NumericalError& e) {
      throw NumericalError(numerical_diagnostic("critic", step, idx, std::as_const(critic).online_params()) + "; " + e.what());
    }
    critic.polyak_update();
    stats.critic_loss += loss.loss;
    ++stats.critic_updates;
  }

  if (config.actor_steps > 0) actor_opt.restart_schedule(config.actor_steps);
  double weight_total = 0.0;
  std::size_t weight_count = 0;
  for (int step = 0; step < config.actor_steps; ++step) {
    const auto idx = buffer.sample_indices(batch_size, rng);
    ActorLoss loss = actor_loss_and_grads(gather(buffer, idx), critic, policy, rng);
    if (loss.used == 0) continue;
    if (!std::isfinite(loss.loss)) {
      throw NumericalError(numerical_diagnostic("actor", step, idx, {&policy.net().params()}));
    }
    try {
      actor_opt.step({&policy.net().params()}, {std::move(loss.grads)});
    } catch (const NumericalError& e) {
      throw NumericalError(numerical_diagnostic("actor", step, idx, {&policy.net().params()}) + "; " + e.what());
    }
    for (double w : loss.weights) weight_total += w;
    weight_count += loss.weights.size();
    stats.actor_loss += loss.loss;
    ++stats.actor_updates;
  }
  if (stats.critic_updates > 0) stats.critic_loss /= stats.critic_updates;
  if (stats.actor_updates > 0) stats.actor_loss /= stats.actor_updates;
  if (weight_count > 0) stats.mean_weight = weight_total / static_cast<double>(weight_count);
  return stats;
}

EvalStats evaluate(Agent& agent, Environment& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  EvalStats stats;
  stats.episodes = n_episodes;
  int successes = 0;
  double total_return = 0.0;
  double total_length = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    const std::uint64_t episode_seed = seed + static_cast<std::uint64_t>(i);
    Rng rng(episode_seed ^ 0x9e3779b97f4a7c15ULL);
    State s = env.reset(episode_seed);
    agent.begin_episode();
    bool success = false;
    while (!env.done()) {
      const StepResult r = env.step(env.bounds().clip(agent.act(env, s, rng)));
      total_return += r.reward;
      success = r.success;
      s = r.state;
    }
    successes += success ? 1 : 0;
    total_length += env.steps();
  }
  stats.success_rate = static_cast<double>(successes) / n_episodes;
  stats.mean_return = total_return / n_episodes;
  stats.mean_length = total_length / n_episodes;
  return stats;
}

}  // namespace aloe
