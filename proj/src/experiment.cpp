#include "aloe/experiment.hpp"

#include "aloe/dataset_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace aloe {

namespace {

std::uint64_t splitmix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

OptimConfig parse_optim(const KeyValueConfig& cfg, const std::string& prefix, OptimConfig c) {
  c.peak_lr = cfg.get_double(prefix + "lr", c.peak_lr, 1e-9, 1.0);
  c.warmup_steps = static_cast<int>(cfg.get_int(prefix + "warmup", c.warmup_steps, 0, 1000000));
  c.weight_decay = cfg.get_double(prefix + "weight_decay", c.weight_decay, 0.0, 1.0);
  c.grad_clip_norm = cfg.get_double(prefix + "grad_clip", c.grad_clip_norm, 0.0, 1e6);
  return c;
}

std::vector<int> parse_widths(const KeyValueConfig& cfg, const std::string& key, std::vector<int> fallback) {
  if (!cfg.has(key)) return fallback;
  auto w = cfg.get_ints(key);
  for (int v : w) {
    if (v < 1 || v > 4096) throw ConfigError(cfg.source(), 0, key + ": widths must lie in [1, 4096]");
  }
  return w;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::Aloe: return "aloe";
    case Method::Bc: return "bc";
    case Method::Dagger: return "dagger";
    case Method::Awr: return "awr";
  }
  return "aloe";
}

Method method_from_string(const std::string& name) {
  if (name == "aloe") return Method::Aloe;
  if (name == "bc") return Method::Bc;
  if (name == "dagger") return Method::Dagger;
  if (name == "awr") return Method::Awr;
  throw std::invalid_argument("unknown method '" + name + "' (expected aloe, bc, dagger or awr)");
}

ExperimentConfig parse_experiment_config(const KeyValueConfig& cfg) {
  ExperimentConfig c;
  try {
    c.method = method_from_string(cfg.get_string("method"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.source(), 0, e.what());
  }
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0, std::numeric_limits<long long>::max()));
  const std::string env_name = cfg.get_string("env", "point_manip");
  if (env_name != "point_manip") throw ConfigError(cfg.source(), 0, "env: only point_manip is supported");
  c.env = load_point_manip_config(cfg, "env.");

  auto& loop = c.loop;
  loop.horizon = static_cast<int>(cfg.get_int("chunk.horizon", 5, 1, 64));
  loop.execution_chunk_len = static_cast<int>(cfg.get_int("chunk.execution_len", loop.horizon, 1, 64));
  loop.iterations = static_cast<int>(cfg.get_int("loop.iterations", loop.iterations, 0, 1000));
  loop.success_quota = static_cast<int>(cfg.get_int("loop.success_quota", loop.success_quota, 1, 100000));
  loop.max_episodes_per_iteration =
      static_cast<int>(cfg.get_int("loop.max_episodes", loop.max_episodes_per_iteration, 1, 1000000));
  loop.critic_steps = static_cast<int>(cfg.get_int("loop.critic_steps", loop.critic_steps, 1, 10000000));
  loop.actor_steps = static_cast<int>(cfg.get_int("loop.actor_steps", loop.actor_steps, 1, 10000000));
  loop.batch_size = static_cast<int>(cfg.get_int("loop.batch_size", loop.batch_size, 1, 100000));
  loop.eval_episodes = static_cast<int>(cfg.get_int("loop.eval_episodes", loop.eval_episodes, 1, 100000));

  auto& cr = c.critic;
  cr.ensemble_size = static_cast<int>(cfg.get_int("critic.ensemble_size", cr.ensemble_size, 2, 64));
  cr.gamma = cfg.get_double("critic.gamma", cr.gamma, 0.0, 0.999999);
  cr.polyak = cfg.get_double("critic.polyak", cr.polyak, 1e-6, 1.0);
  cr.n_next_samples = static_cast<int>(cfg.get_int("critic.n_next_samples", cr.n_next_samples, 1, 1024));
  cr.pessimistic_targets = cfg.get_bool("critic.pessimistic_targets", cr.pessimistic_targets);
  cr.hidden = parse_widths(cfg, "critic.hidden", cr.hidden);
  cr.value_scale = cfg.get_double("critic.value_scale", cr.value_scale, 1e-6, 1e6);

  auto& ac = c.actor;
  ac.horizon = loop.horizon;
  ac.action_dim = 2;
  ac.integration_steps = static_cast<int>(cfg.get_int("actor.integration_steps", ac.integration_steps, 1, 1024));
  ac.beta = cfg.get_double("actor.beta", ac.beta, 1e-9, 1e12);
  ac.eps_clip = cfg.get_double("actor.eps_clip", ac.eps_clip, 1e-9, 100.0);
  ac.n_value_samples = static_cast<int>(cfg.get_int("actor.n_value_samples", ac.n_value_samples, 1, 1024));
  ac.hidden = parse_widths(cfg, "actor.hidden", ac.hidden);
  try {
    cr.activation = activation_from_string(cfg.get_string("critic.activation", to_string(cr.activation)));
    ac.activation = activation_from_string(cfg.get_string("actor.activation", to_string(ac.activation)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.source(), 0, e.what());
  }

  c.critic_optim = parse_optim(cfg, "optim.critic.", c.critic_optim);
  c.actor_optim = parse_optim(cfg, "optim.actor.", c.actor_optim);
  c.value_optim = parse_optim(cfg, "optim.value.", c.value_optim);

  c.value.bins = static_cast<int>(cfg.get_int("awr.bins", c.value.bins, 2, 100000));
  c.value.v_min = cfg.get_double("awr.v_min", default_v_min(c.env.c_fail, cr.gamma, c.env.max_steps), -1e12, 0.0);
  c.value.v_max = cfg.get_double("awr.v_max", 0.0, -1e12, 1e12);
  c.value.hidden = parse_widths(cfg, "awr.hidden", c.value.hidden);

  c.demos = static_cast<int>(cfg.get_int("demo.count", c.demos, 1, 100000));
  if (cfg.has("demo.corridors")) c.demo_corridors = cfg.get_ints("demo.corridors");
  for (int k : c.demo_corridors) {
    if (k < 0 || k >= static_cast<int>(c.env.corridors.size())) {
      throw ConfigError(cfg.source(), 0, "demo.corridors: corridor index out of range");
    }
  }
  if (c.demo_corridors.empty()) throw ConfigError(cfg.source(), 0, "demo.corridors: empty list");
  c.demo_noise = cfg.get_double("demo.noise", c.demo_noise, 0.0, 10.0);
  c.warmstart_steps = static_cast<int>(cfg.get_int("warmstart.steps", c.warmstart_steps, 1, 10000000));

  c.oracle_margin = cfg.get_double("oracle.margin", c.oracle_margin, 0.0, 1.0);
  c.stall_window = static_cast<int>(cfg.get_int("oracle.stall_window", c.stall_window, 0, 100000));
  c.stall_min_progress = cfg.get_double("oracle.stall_min_progress", c.stall_min_progress, 0.0, 1.0);

  c.eval_seed = static_cast<std::uint64_t>(cfg.get_int("eval.seed", 1000000, 0, std::numeric_limits<long long>::max()));
  c.save_buffer = cfg.get_bool("output.save_buffer", false);

  cfg.finish();
  try {
    loop.validate();
    cr.validate();
    ac.validate();
    c.critic_optim.validate();
    c.actor_optim.validate();
    c.value_optim.validate();
    c.value.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.source(), 0, e.what());
  }
  c.canonical_text = cfg.canonical_text();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::pair<std::string, std::string>>& overrides) {
  KeyValueConfig cfg = KeyValueConfig::load(path);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return parse_experiment_config(cfg);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string metrics_header() {
  return "iteration,success_rate,intervention_rate,mean_return,critic_loss,actor_loss,wall_time,"
         "episodes,collect_success_rate,buffer_segments";
}

std::string metrics_line(const MetricsRow& r) {
  std::ostringstream out;
  out << r.iteration << ',' << format_double(r.success_rate) << ',' << format_double(r.intervention_rate) << ','
      << format_double(r.mean_return) << ',' << format_double(r.critic_loss) << ','
      << format_double(r.actor_loss) << ',' << format_double(r.wall_time) << ',' << r.episodes << ','
      << format_double(r.collect_success_rate) << ',' << r.buffer_segments;
  return out.str();
}

InterventionOracle make_oracle(const ExperimentConfig& config) {
  return point_manip_oracle(config.env, config.oracle_margin, config.stall_window, config.stall_min_progress);
}

ReplayBuffer demonstration_buffer(const ExperimentConfig& config) {
  PointManipEnv env(config.env);
  ReplayBuffer buffer(config.loop.horizon, 2);
  for (int i = 0; i < config.demos; ++i) {
    const int corridor = config.demo_corridors[static_cast<std::size_t>(i) % config.demo_corridors.size()];
    const Episode ep = point_manip_demonstration(env, splitmix(config.seed, 1000 + static_cast<std::uint64_t>(i)),
                                                 corridor, config.demo_noise);
    if (!ep.steps.back().success) continue;  // warm start uses successful demonstrations only
    buffer.append_episode(ep, 0);
  }
  if (buffer.empty()) throw std::runtime_error("no successful demonstrations");
  return buffer;
}

Episode record_episode(Agent& agent, Environment& env, std::uint64_t seed, Rng& rng) {
  InterventionOracle none;
  none.takeover = never_take_over();
  none.max_takeovers = 0;
  return rollout_with_oracle(agent, none, env, seed, rng).policy;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  fs::create_directories(out_dir / "checkpoints");

  PointManipEnv env(config.env);
  const InterventionOracle oracle = make_oracle(config);
  Rng policy_rng(splitmix(config.seed, 1));
  Rng critic_rng(splitmix(config.seed, 2));
  Rng train_rng(splitmix(config.seed, 3));
  Rng collect_rng(splitmix(config.seed, 4));

  FlowPolicy policy(env.obs_dim(), env.num_tasks(), env.bounds(), config.actor, policy_rng);
  AdamW actor_opt(config.actor_optim, {&policy.net().params()});

  const ReplayBuffer demos = demonstration_buffer(config);
  bc_train(demos, policy, actor_opt, config.warmstart_steps, config.loop.batch_size, train_rng);

  std::optional<EnsembleCritic> critic;
  std::optional<AdamW> critic_opt;
  std::optional<DistributionalValueCritic> value;
  std::optional<AdamW> value_opt;
  if (config.method == Method::Aloe) {
    CriticFeatures features{CriticFeatures::Kind::Concat, env.obs_dim(), config.loop.horizon, 2, env.num_tasks()};
    critic.emplace(features, config.critic, critic_rng);
    critic_opt.emplace(config.critic_optim, std::as_const(*critic).online_params());
  } else if (config.method == Method::Awr) {
    value.emplace(env.obs_dim(), env.num_tasks(), config.value, critic_rng);
    value_opt.emplace(config.value_optim, std::vector<const Vector*>{&value->net().params()});
  }

  ReplayBuffer buffer = demos;
  buffer.set_env_config_hash(sha256_hex(config.canonical_text));

  std::ofstream csv(out_dir / "metrics.csv");
  csv << metrics_header() << '\n';
  ExperimentResult result;
  auto save_checkpoints = [&](int it) {
    const std::string stem = "iter_" + std::to_string(it);
    save_checkpoint(out_dir / "checkpoints" / (stem + "_actor.ckpt"), policy.to_checkpoint());
    if (critic) save_checkpoint(out_dir / "checkpoints" / (stem + "_critic.ckpt"), critic->to_checkpoint());
    if (value) save_checkpoint(out_dir / "checkpoints" / (stem + "_value.ckpt"), value->to_checkpoint());
  };
  auto finish_row = [&](MetricsRow row) {
    ChunkedPolicyAgent agent(policy, config.loop.execution_chunk_len);
    const EvalStats ev = evaluate(agent, env, config.loop.eval_episodes, config.eval_seed);
    row.success_rate = ev.success_rate;
    row.mean_return = ev.mean_return;
    row.buffer_segments = config.method == Method::Bc ? demos.size() : buffer.size();
    row.wall_time = elapsed();
    csv << metrics_line(row) << '\n';
    csv.flush();
    save_checkpoints(row.iteration);
    result.rows.push_back(row);
  };

  finish_row(MetricsRow{});
  for (int it = 1; it <= config.loop.iterations; ++it) {
    MetricsRow row;
    row.iteration = it;
    if (config.method == Method::Bc) {
      row.actor_loss = bc_train(demos, policy, actor_opt, config.loop.actor_steps, config.loop.batch_size, train_rng);
    } else if (config.method == Method::Dagger) {
      const DaggerStats s = dagger_iteration(policy, actor_opt, oracle, env, buffer, config.loop, it, collect_rng);
      row.actor_loss = s.bc_loss;
      row.episodes = s.rollout.episodes;
      row.intervention_rate = s.rollout.intervention_rate();
      row.collect_success_rate = s.rollout.success_rate();
    } else {
      ChunkedPolicyAgent agent(policy, config.loop.execution_chunk_len);
      const RolloutStats rs = collect_iteration(agent, oracle, env, buffer, config.loop, it, collect_rng);
      row.episodes = rs.episodes;
      row.intervention_rate = rs.intervention_rate();
      row.collect_success_rate = rs.success_rate();
      if (config.method == Method::Aloe) {
        const TrainStats ts = train_iteration(buffer, *critic, *critic_opt, policy, actor_opt, config.loop, train_rng);
        row.critic_loss = ts.critic_loss;
        row.actor_loss = ts.actor_loss;
      } else {
        const AwrStats as = train_awr_iteration(buffer, *value, *value_opt, policy, actor_opt, config.loop,
                                                config.critic.gamma, train_rng);
        row.critic_loss = as.value_loss;
        row.actor_loss = as.policy_loss;
      }
    }
    finish_row(row);
  }
  if (config.save_buffer && config.method != Method::Bc) buffer.save(out_dir / "buffer");

  nlohmann::json manifest;
  manifest["method"] = to_string(config.method);
  manifest["seed"] = config.seed;
  manifest["config"] = config.canonical_text;
  manifest["config_sha256"] = sha256_hex(config.canonical_text);
  manifest["env_config_hash"] = buffer.env_config_hash();
  manifest["metrics_schema_version"] = kMetricsSchemaVersion;
  manifest["metrics_columns"] = metrics_header();
  manifest["iterations"] = config.loop.iterations;
  manifest["horizon"] = config.loop.horizon;
  manifest["action_dim"] = 2;
  manifest["demonstrations"] = demos.episodes().size();
  std::vector<std::string> ckpts;
  for (const auto& entry : fs::directory_iterator(out_dir / "checkpoints")) ckpts.push_back(entry.path().filename().string());
  std::sort(ckpts.begin(), ckpts.end());
  manifest["checkpoints"] = ckpts;
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

std::vector<QTraceRow> q_trace(const EnsembleCritic& critic, const std::vector<TransitionSegment>& episode) {
  std::vector<QTraceRow> rows;
  for (std::size_t i = 0; i < episode.size(); ++i) {
    const TransitionSegment& seg = episode[i];
    if (!seg.chunk.full()) continue;
    QTraceRow row;
    row.chunk_index = static_cast<int>(i);
    row.start_step = seg.start_step;
    row.q_members = critic.member_values(seg.state, seg.chunk, false);
    row.q_pess = *std::min_element(row.q_members.begin(), row.q_members.end());
    row.reward_sum = seg.reward_sum();
    row.source = seg.source;
    row.terminated = seg.terminated;
    row.success = seg.success;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_q_trace_csv(std::ostream& out, const std::vector<QTraceRow>& rows, int ensemble_size) {
  out << "chunk_index,start_step,q_pess";
  for (int i = 0; i < ensemble_size; ++i) out << ",q_" << i;
  out << ",reward_sum,source,terminated,success\n";
  for (const auto& r : rows) {
    out << r.chunk_index << ',' << r.start_step << ',' << format_double(r.q_pess);
    for (double q : r.q_members) out << ',' << format_double(q);
    out << ',' << format_double(r.reward_sum) << ',' << to_string(r.source) << ',' << (r.terminated ? 1 : 0) << ','
        << (r.success ? 1 : 0) << '\n';
  }
}

void emit_q_trace(const std::filesystem::path& critic_checkpoint, const std::filesystem::path& episode_file,
                  std::ostream& out) {
  const EnsembleCritic critic = EnsembleCritic::from_checkpoint(load_checkpoint(critic_checkpoint));
  const auto segments = read_segments_jsonl(episode_file);
  const auto& f = critic.features();
  for (const auto& seg : segments) {
    if (seg.state.obs.size() != f.obs_dim || seg.chunk.horizon() != f.horizon ||
        seg.chunk.action_dim() != f.action_dim) {
      throw std::invalid_argument("qtrace: episode dimensions do not match the critic checkpoint");
    }
  }
  write_q_trace_csv(out, q_trace(critic, segments), critic.size());
}

}  // namespace aloe
