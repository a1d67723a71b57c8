#pragma once

// End-to-end runs: warm-start BC from scripted demonstrations, then T
// iterations of collect / train / evaluate for one method, with metrics,
// checkpoints and a manifest written to an output directory.

#include "aloe/baselines.hpp"
#include "aloe/kv_config.hpp"
#include "aloe/point_manip.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace aloe {

enum class Method { Aloe, Bc, Dagger, Awr };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct ExperimentConfig {
  Method method = Method::Aloe;
  std::uint64_t seed = 0;
  PointManipConfig env;
  IterationConfig loop;
  CriticConfig critic;
  FlowConfig actor;
  OptimConfig critic_optim;
  OptimConfig actor_optim;
  DistributionalConfig value;
  OptimConfig value_optim;

  int demos = 20;
  std::vector<int> demo_corridors{0, 1};
  double demo_noise = 0.1;
  int warmstart_steps = 2000;

  double oracle_margin = 0.02;
  int stall_window = 40;
  double stall_min_progress = 0.01;

  std::uint64_t eval_seed = 1000000;
  bool save_buffer = false;

  /// Sorted key = value text of every entry read from the file.
  std::string canonical_text;
};

/// Reads every key, validates ranges and rejects unknown keys.
ExperimentConfig parse_experiment_config(const KeyValueConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::pair<std::string, std::string>>& overrides = {});

std::string sha256_hex(const std::string& data);

struct MetricsRow {
  int iteration = 0;
  double success_rate = 0.0;       // evaluation, no intervention
  double intervention_rate = 0.0;  // handovers per collected episode
  double mean_return = 0.0;        // evaluation
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double wall_time = 0.0;
  int episodes = 0;
  double collect_success_rate = 0.0;
  std::size_t buffer_segments = 0;
};

inline constexpr int kMetricsSchemaVersion = 1;
std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
};

/// Runs the experiment and writes metrics.csv, manifest.json and
/// checkpoints/ under `out_dir`.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

InterventionOracle make_oracle(const ExperimentConfig& config);

/// Scripted demonstrations used for the warm start, stored as intervention data.
ReplayBuffer demonstration_buffer(const ExperimentConfig& config);

/// One policy episode with no intervention.
Episode record_episode(Agent& agent, Environment& env, std::uint64_t seed, Rng& rng);

struct QTraceRow {
  int chunk_index = 0;
  int start_step = 0;
  double q_pess = 0.0;
  std::vector<double> q_members;
  double reward_sum = 0.0;
  Source source = Source::PolicyRollout;
  bool terminated = false;
  bool success = false;
};

/// One row per full-length chunk of the episode, in order.
std::vector<QTraceRow> q_trace(const EnsembleCritic& critic, const std::vector<TransitionSegment>& episode);
void write_q_trace_csv(std::ostream& out, const std::vector<QTraceRow>& rows, int ensemble_size);
/// Loads a critic checkpoint and a JSON-lines episode, writes the CSV.
void emit_q_trace(const std::filesystem::path& critic_checkpoint, const std::filesystem::path& episode_file,
                  std::ostream& out);

}  // namespace aloe
