#pragma once

// Continuous long-horizon point manipulation: reach an object, carry it past
// a barrier of unsafe regions through one of several corridors, and deliver
// it to the target region of the current task.
//
// obs = [agent_x, agent_y, object_x, object_y, grasped]

#include "aloe/environment.hpp"
#include "aloe/intervention.hpp"
#include "aloe/kv_config.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace aloe {

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(const Eigen::Vector2d& p) const;
  double distance(const Eigen::Vector2d& p) const;
  Eigen::Vector2d center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

struct PointManipConfig {
  Eigen::Vector2d agent_start{0.12, 0.5};
  Eigen::Vector2d object_start{0.28, 0.5};
  double jitter = 0.03;
  std::vector<Box> targets{{0.80, 0.42, 0.95, 0.58}};  // one target per task
  std::vector<Box> unsafe{{0.45, 0.30, 0.60, 0.70}, {0.45, 0.00, 0.60, 0.22}};
  // Barrier band crossed through corridors; corridors are horizontal gaps
  // through the band given by their centre line y.
  double barrier_x0 = 0.45;
  double barrier_x1 = 0.60;
  std::vector<double> corridors{0.82, 0.26};
  double approach = 0.05;
  int max_steps = 300;
  double dt = 0.02;
  double action_limit = 1.0;
  double grasp_radius = 0.04;
  double c_fail = 60.0;

  void validate() const;
  int num_tasks() const { return static_cast<int>(targets.size()); }
};

/// Reads `<prefix>*` keys (e.g. env.max_steps) on top of the defaults.
PointManipConfig load_point_manip_config(const KeyValueConfig& cfg, const std::string& prefix = "env.");

class PointManipEnv : public Environment {
 public:
  explicit PointManipEnv(PointManipConfig config);

  int obs_dim() const override { return 5; }
  int action_dim() const override { return 2; }
  int num_tasks() const override { return config_.num_tasks(); }
  const ActionBounds& bounds() const override { return bounds_; }
  RewardSpec reward_spec() const override { return RewardSpec{config_.c_fail, -1.0}; }
  int max_steps() const override { return config_.max_steps; }

  State reset(std::uint64_t seed) override;
  StepResult step(const Vector& action) override;
  const State& state() const override { return state_; }
  bool done() const override { return done_; }
  int steps() const override { return steps_; }
  void restart_clock() override { steps_ = 0; }
  double progress(const State& state) const override;
  std::unique_ptr<Environment> clone() const override;

  const PointManipConfig& config() const { return config_; }
  /// Distance from the agent to the nearest unsafe region (0 inside one).
  double unsafe_distance(const State& state) const;

 private:
  void sync_state();

  PointManipConfig config_;
  ActionBounds bounds_;
  Eigen::Vector2d agent_;
  Eigen::Vector2d object_;
  bool grasped_ = false;
  int task_ = 0;
  State state_;
  int steps_ = 0;
  bool done_ = true;
};

/// Waypoint controller that solves the task from any safe state. With a
/// `corridor` it always crosses through that corridor; otherwise it uses the
/// corridor whose centre line is closest to the agent.
class PointManipExpert {
 public:
  explicit PointManipExpert(PointManipConfig config, double speed = 0.9);

  Vector act(const State& state, std::optional<int> corridor = std::nullopt) const;
  /// Length of the path the expert would follow from `state` to delivery.
  double remaining_path(const State& state, std::optional<int> corridor = std::nullopt) const;

 private:
  Eigen::Vector2d next_waypoint(const Eigen::Vector2d& from, const Eigen::Vector2d& dest,
                                std::optional<int> corridor) const;
  double path_length(Eigen::Vector2d from, const Eigen::Vector2d& dest,
                     std::optional<int> corridor) const;
  int side(const Eigen::Vector2d& p) const;
  int nearest_corridor(double y) const;

  PointManipConfig config_;
  double speed_;
};

/// Rolls out the expert with a fixed corridor and Gaussian action noise.
Episode point_manip_demonstration(PointManipEnv& env, std::uint64_t seed, int corridor,
                                  double action_noise);

InterventionOracle point_manip_oracle(const PointManipConfig& config, double margin,
                                      int stall_window, double stall_min_progress);

}  // namespace aloe
