// Command-line front end: run experiments, evaluate checkpoints, export
// Q-traces and check the theory and the scripted oracle.

#include "aloe/dataset_io.hpp"
#include "aloe/experiment.hpp"
#include "aloe/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace aloe;

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

ExperimentConfig load_with_seed(const std::string& path, const std::vector<std::string>& sets, long long seed) {
  auto overrides = parse_overrides(sets);
  if (seed >= 0) overrides.emplace_back("seed", std::to_string(seed));
  return load_experiment_config(path, overrides);
}

FlowPolicy load_policy(const std::string& path, const PointManipEnv& env) {
  return FlowPolicy::from_checkpoint(load_checkpoint(path), env.bounds());
}

int cmd_run(const std::string& config, const std::vector<std::string>& sets, long long seed, const std::string& out) {
  const ExperimentConfig cfg = load_with_seed(config, sets, seed);
  const ExperimentResult r = run_experiment(cfg, out);
  std::cout << metrics_header() << '\n';
  for (const auto& row : r.rows) std::cout << metrics_line(row) << '\n';
  return 0;
}

int cmd_eval(const std::string& config, const std::vector<std::string>& sets, const std::string& checkpoint,
             int episodes, long long seed) {
  const ExperimentConfig cfg = load_with_seed(config, sets, -1);
  PointManipEnv env(cfg.env);
  const FlowPolicy policy = load_policy(checkpoint, env);
  ChunkedPolicyAgent agent(policy, cfg.loop.execution_chunk_len);
  const EvalStats s = evaluate(agent, env, episodes, seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.eval_seed);
  std::cout << nlohmann::json{{"episodes", s.episodes},
                              {"success_rate", s.success_rate},
                              {"mean_return", s.mean_return},
                              {"mean_length", s.mean_length}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_record(const std::string& config, const std::vector<std::string>& sets, const std::string& checkpoint,
               int episodes, long long seed, const std::string& out) {
  const ExperimentConfig cfg = load_with_seed(config, sets, -1);
  PointManipEnv env(cfg.env);
  const FlowPolicy policy = load_policy(checkpoint, env);
  ChunkedPolicyAgent agent(policy, cfg.loop.execution_chunk_len);
  fs::create_directories(out);
  const std::uint64_t base = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.eval_seed;
  for (int i = 0; i < episodes; ++i) {
    Rng rng(base + static_cast<std::uint64_t>(i));
    const Episode ep = record_episode(agent, env, base + static_cast<std::uint64_t>(i), rng);
    char name[64];
    std::snprintf(name, sizeof name, "episode_%03d.jsonl", i);
    write_segments_jsonl(fs::path(out) / name, slice_episode(ep, cfg.loop.horizon));
    std::cout << name << ' ' << (ep.steps.back().success ? "success" : "failure") << ' ' << ep.steps.size() << '\n';
  }
  return 0;
}

int cmd_qtrace(const std::string& checkpoint, const std::string& episode, const std::string& out) {
  if (out.empty() || out == "-") {
    emit_q_trace(checkpoint, episode, std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    emit_q_trace(checkpoint, episode, f);
  }
  return 0;
}

int cmd_verify_theorem(int instances, long long seed, double tolerance, double eps_clip) {
  Rng rng(seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
  std::uniform_int_distribution<int> size(2, 10);
  nlohmann::json report;
  double worst_ml = 0.0, worst_shift = 0.0, worst_dual = 0.0, worst_clipped = 0.0;
  int failures = 0;
  for (int i = 0; i < instances; ++i) {
    const DiscreteInstance inst = random_instance(size(rng), rng);
    const TheoremReport r = verify_theorem(inst, tolerance, eps_clip);
    worst_ml = std::max(worst_ml, r.tv_weighted_ml);
    worst_shift = std::max(worst_shift, r.tv_advantage_shift);
    worst_dual = std::max(worst_dual, r.tv_dual);
    worst_clipped = std::max(worst_clipped, r.tv_clipped);
    failures += r.passed ? 0 : 1;
  }
  report["instances"] = instances;
  report["tolerance"] = tolerance;
  report["failures"] = failures;
  report["worst_tv_weighted_ml"] = worst_ml;
  report["worst_tv_advantage_shift"] = worst_shift;
  report["worst_tv_dual"] = worst_dual;
  report["worst_tv_clipped_reported"] = worst_clipped;
  report["passed"] = failures == 0;
  std::cout << report.dump(2) << '\n';
  return failures == 0 ? 0 : 1;
}

int cmd_oracle_check(const std::string& config, const std::vector<std::string>& sets, int episodes, long long seed) {
  const ExperimentConfig cfg = load_with_seed(config, sets, -1);
  PointManipEnv env(cfg.env);
  const std::uint64_t base = seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg.eval_seed;
  const PointManipExpert expert(cfg.env);
  ControllerAgent oracle_agent([&expert](const Environment&, const State& s) { return expert.act(s); });
  RandomAgent random_agent;
  const EvalStats o = evaluate(oracle_agent, env, episodes, base);
  const EvalStats r = evaluate(random_agent, env, episodes, base);
  std::cout << nlohmann::json{{"episodes", episodes},
                              {"oracle_success_rate", o.success_rate},
                              {"oracle_mean_length", o.mean_length},
                              {"random_success_rate", r.success_rate},
                              {"random_mean_length", r.mean_length}}
                   .dump(2)
            << '\n';
  return o.success_rate == 1.0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunked-action off-policy actor-critic with scripted intervention"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, episode;
  std::vector<std::string> sets;
  long long seed = -1;
  int episodes = 20;
  int instances = 50;
  double tolerance = 1e-6;
  double eps_clip = 2.0;

  auto* run = app.add_subcommand("run", "Warm start, then collect / train / evaluate for T iterations");
  run->add_option("--config", config, "Key-value config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--set", sets, "Override a config entry (key=value)");

  auto* ev = app.add_subcommand("eval", "Evaluate an actor checkpoint without intervention");
  ev->add_option("--config", config, "Key-value config file")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", checkpoint, "Actor checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed, "First episode seed");
  ev->add_option("--set", sets, "Override a config entry (key=value)");

  auto* rec = app.add_subcommand("record", "Record policy episodes as JSON-lines segment files");
  rec->add_option("--config", config, "Key-value config file")->required()->check(CLI::ExistingFile);
  rec->add_option("--checkpoint", checkpoint, "Actor checkpoint")->required()->check(CLI::ExistingFile);
  rec->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  rec->add_option("--seed", seed, "First episode seed");
  rec->add_option("--out", out, "Output directory")->required();
  rec->add_option("--set", sets, "Override a config entry (key=value)");

  auto* qt = app.add_subcommand("qtrace", "Per-chunk pessimistic Q values along an episode");
  qt->add_option("--checkpoint", checkpoint, "Critic checkpoint")->required()->check(CLI::ExistingFile);
  qt->add_option("--episode", episode, "Episode segments (JSON lines)")->required()->check(CLI::ExistingFile);
  qt->add_option("--out", out, "CSV output path (default stdout)");

  auto* th = app.add_subcommand("verify-theorem", "Check KL-constrained improvement on random discrete instances");
  th->add_option("--instances", instances, "Number of random instances")->check(CLI::PositiveNumber);
  th->add_option("--seed", seed, "Instance generator seed");
  th->add_option("--tolerance", tolerance, "Total-variation tolerance");
  th->add_option("--eps-clip", eps_clip, "Clip used for the reported clipped-weight deviation");

  auto* oc = app.add_subcommand("oracle-check", "Success rates of the scripted oracle and a random policy");
  oc->add_option("--config", config, "Key-value config file")->required()->check(CLI::ExistingFile);
  oc->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  oc->add_option("--seed", seed, "First episode seed");
  oc->add_option("--set", sets, "Override a config entry (key=value)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, sets, seed, out);
    if (*ev) return cmd_eval(config, sets, checkpoint, episodes, seed);
    if (*rec) return cmd_record(config, sets, checkpoint, episodes, seed, out);
    if (*qt) return cmd_qtrace(checkpoint, episode, out);
    if (*th) return cmd_verify_theorem(instances, seed, tolerance, eps_clip);
    if (*oc) return cmd_oracle_check(config, sets, episodes, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
