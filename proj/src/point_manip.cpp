#include "aloe/point_manip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aloe {

namespace {

constexpr double kAlignTol = 1e-9;
constexpr double kCorridorTol = 0.01;
constexpr double kExitOvershoot = 0.01;

Box parse_box(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get_doubles(key, 4);
  Box b{v[0], v[1], v[2], v[3]};
  if (b.x1 <= b.x0 || b.y1 <= b.y0) throw ConfigError(cfg.source(), 0, key + ": degenerate box");
  return b;
}

std::vector<Box> parse_box_list(const KeyValueConfig& cfg, const std::string& prefix,
                                std::vector<Box> fallback) {
  const auto keys = cfg.keys_with_prefix(prefix);
  if (keys.empty()) return fallback;
  std::vector<Box> boxes;
  for (int i = 0;; ++i) {
    const std::string key = prefix + std::to_string(i);
    if (!cfg.has(key)) break;
    boxes.push_back(parse_box(cfg, key));
  }
  if (boxes.size() != keys.size()) {
    throw ConfigError(cfg.source(), 0, prefix + "*: indices must be contiguous from 0");
  }
  return boxes;
}

}  // namespace

bool Box::contains(const Eigen::Vector2d& p) const {
  return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
}

double Box::distance(const Eigen::Vector2d& p) const {
  const double dx = std::max({x0 - p.x(), 0.0, p.x() - x1});
  const double dy = std::max({y0 - p.y(), 0.0, p.y() - y1});
  return std::hypot(dx, dy);
}

void PointManipConfig::validate() const {
  if (targets.empty()) throw std::invalid_argument("PointManipConfig: empty task table");
  if (corridors.empty()) throw std::invalid_argument("PointManipConfig: no corridors");
  if (max_steps < 300) throw std::invalid_argument("PointManipConfig: max_steps must be >= 300");
  if (dt <= 0.0 || action_limit <= 0.0 || grasp_radius <= 0.0 || c_fail <= 0.0 || jitter < 0.0) {
    throw std::invalid_argument("PointManipConfig: non-positive physical parameter");
  }
  if (barrier_x1 <= barrier_x0) throw std::invalid_argument("PointManipConfig: empty barrier band");
  const double lx = barrier_x0 - approach;
  const double rx = barrier_x1 + approach;
  if (object_start.x() + jitter >= lx || agent_start.x() + jitter >= lx) {
    throw std::invalid_argument("PointManipConfig: start positions must lie left of the barrier");
  }
  for (const auto& t : targets) {
    if (t.x0 <= rx) throw std::invalid_argument("PointManipConfig: targets must lie right of the barrier");
  }
}

PointManipConfig load_point_manip_config(const KeyValueConfig& cfg, const std::string& prefix) {
  PointManipConfig c;
  if (cfg.has(prefix + "agent_start")) {
    const auto v = cfg.get_doubles(prefix + "agent_start", 2);
    c.agent_start = {v[0], v[1]};
  }
  if (cfg.has(prefix + "object_start")) {
    const auto v = cfg.get_doubles(prefix + "object_start", 2);
    c.object_start = {v[0], v[1]};
  }
  c.jitter = cfg.get_double(prefix + "jitter", c.jitter, 0.0, 0.2);
  c.targets = parse_box_list(cfg, prefix + "target.", c.targets);
  c.unsafe = parse_box_list(cfg, prefix + "unsafe.", c.unsafe);
  c.barrier_x0 = cfg.get_double(prefix + "barrier_x0", c.barrier_x0, 0.0, 1.0);
  c.barrier_x1 = cfg.get_double(prefix + "barrier_x1", c.barrier_x1, 0.0, 1.0);
  if (cfg.has(prefix + "corridors")) c.corridors = cfg.get_doubles(prefix + "corridors");
  c.approach = cfg.get_double(prefix + "approach", c.approach, 0.0, 0.5);
  c.max_steps = static_cast<int>(cfg.get_int(prefix + "max_steps", c.max_steps, 300, 100000));
  c.dt = cfg.get_double(prefix + "dt", c.dt, 1e-4, 1.0);
  c.action_limit = cfg.get_double(prefix + "action_limit", c.action_limit, 1e-3, 10.0);
  c.grasp_radius = cfg.get_double(prefix + "grasp_radius", c.grasp_radius, 1e-3, 0.5);
  c.c_fail = cfg.get_double(prefix + "c_fail", c.c_fail, 1e-6, 1e6);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.source(), 0, e.what());
  }
  return c;
}

PointManipEnv::PointManipEnv(PointManipConfig config) : config_(std::move(config)) {
  config_.validate();
  bounds_.low = Vector::Constant(2, -config_.action_limit);
  bounds_.high = Vector::Constant(2, config_.action_limit);
}

State PointManipEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> jitter(-config_.jitter, config_.jitter);
  const auto draw = [&] { return config_.jitter > 0.0 ? jitter(rng) : 0.0; };
  agent_ = config_.agent_start + Eigen::Vector2d(draw(), draw());
  object_ = config_.object_start + Eigen::Vector2d(draw(), draw());
  task_ = config_.num_tasks() > 1
              ? static_cast<int>(rng() % static_cast<std::uint64_t>(config_.num_tasks()))
              : 0;
  grasped_ = false;
  steps_ = 0;
  done_ = false;
  sync_state();
  return state_;
}

StepResult PointManipEnv::step(const Vector& action) {
  if (done_) throw EnvironmentError("PointManipEnv: step on a terminated episode");
  if (action.size() != 2) throw std::invalid_argument("PointManipEnv: action must be 2-dimensional");
  const Vector a = bounds_.clip(action);
  agent_ = (agent_ + config_.dt * Eigen::Vector2d(a[0], a[1])).cwiseMax(0.0).cwiseMin(1.0);
  if (!grasped_ && (agent_ - object_).norm() <= config_.grasp_radius) grasped_ = true;
  if (grasped_) object_ = agent_;
  ++steps_;

  const bool success = grasped_ && config_.targets[task_].contains(object_);
  bool failure = false;
  if (!success) {
    for (const auto& box : config_.unsafe) failure = failure || box.contains(agent_);
    failure = failure || steps_ >= config_.max_steps;
  }
  done_ = success || failure;
  sync_state();
  return StepResult{state_, step_reward(success, failure, done_, reward_spec()), done_, success};
}

void PointManipEnv::sync_state() {
  state_.obs.resize(5);
  state_.obs << agent_.x(), agent_.y(), object_.x(), object_.y(), grasped_ ? 1.0 : 0.0;
  state_.task_id = task_;
}

double PointManipEnv::unsafe_distance(const State& state) const {
  const Eigen::Vector2d agent(state.obs[0], state.obs[1]);
  double d = std::numeric_limits<double>::infinity();
  for (const auto& box : config_.unsafe) d = std::min(d, box.distance(agent));
  return d;
}

double PointManipEnv::progress(const State& state) const {
  const PointManipExpert expert(config_);
  State start;
  start.obs.resize(5);
  start.obs << config_.agent_start.x(), config_.agent_start.y(), config_.object_start.x(),
      config_.object_start.y(), 0.0;
  start.task_id = state.task_id;
  const double total = expert.remaining_path(start);
  return std::clamp(1.0 - expert.remaining_path(state) / total, 0.0, 1.0);
}

std::unique_ptr<Environment> PointManipEnv::clone() const {
  return std::make_unique<PointManipEnv>(*this);
}

PointManipExpert::PointManipExpert(PointManipConfig config, double speed)
    : config_(std::move(config)), speed_(speed) {}

int PointManipExpert::side(const Eigen::Vector2d& p) const {
  if (p.x() < config_.barrier_x0 - config_.approach - kAlignTol) return -1;
  if (p.x() > config_.barrier_x1 + config_.approach + kAlignTol) return 1;
  return 0;
}

int PointManipExpert::nearest_corridor(double y) const {
  int best = 0;
  for (int c = 1; c < static_cast<int>(config_.corridors.size()); ++c) {
    if (std::abs(config_.corridors[c] - y) < std::abs(config_.corridors[best] - y)) best = c;
  }
  return best;
}

Eigen::Vector2d PointManipExpert::next_waypoint(const Eigen::Vector2d& from,
                                                const Eigen::Vector2d& dest,
                                                std::optional<int> corridor) const {
  const int here = side(from);
  const int there = side(dest);
  if (here == there) return dest;
  const double left = config_.barrier_x0 - config_.approach;
  const double right = config_.barrier_x1 + config_.approach;
  if (here == 0) {
    // Inside the band: align with the corridor, then leave towards dest.
    const double yc = config_.corridors.at(corridor.value_or(nearest_corridor(from.y())));
    if (std::abs(from.y() - yc) > kCorridorTol) return {from.x(), yc};
    return {there < 0 ? left - kExitOvershoot : right + kExitOvershoot, yc};
  }
  const double yc = config_.corridors.at(corridor.value_or(nearest_corridor(from.y())));
  return {here < 0 ? left : right, yc};
}

double PointManipExpert::path_length(Eigen::Vector2d from, const Eigen::Vector2d& dest,
                                     std::optional<int> corridor) const {
  double total = 0.0;
  for (int hop = 0; hop < 8 && (from - dest).norm() > 0.0; ++hop) {
    const Eigen::Vector2d w = next_waypoint(from, dest, corridor);
    total += (w - from).norm();
    from = w;
  }
  return total;
}

double PointManipExpert::remaining_path(const State& state, std::optional<int> corridor) const {
  const Eigen::Vector2d agent(state.obs[0], state.obs[1]);
  const Eigen::Vector2d object(state.obs[2], state.obs[3]);
  const bool grasped = state.obs[4] > 0.5;
  const Eigen::Vector2d goal = config_.targets.at(state.task_id).center();
  auto length_via = [&](std::optional<int> c) {
    if (grasped) return path_length(agent, goal, c);
    return path_length(agent, object, c) + path_length(object, goal, c);
  };
  if (corridor || side(agent) == 0) return length_via(corridor);
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(config_.corridors.size()); ++c) {
    best = std::min(best, length_via(c));
  }
  return best;
}

Vector PointManipExpert::act(const State& state, std::optional<int> corridor) const {
  const Eigen::Vector2d agent(state.obs[0], state.obs[1]);
  const bool grasped = state.obs[4] > 0.5;
  const Eigen::Vector2d dest = grasped ? config_.targets.at(state.task_id).center()
                                       : Eigen::Vector2d(state.obs[2], state.obs[3]);
  const Eigen::Vector2d delta = next_waypoint(agent, dest, corridor) - agent;
  const double reach = speed_ * config_.dt;
  Eigen::Vector2d velocity = delta.norm() > reach ? Eigen::Vector2d(delta.normalized() * speed_)
                                                  : Eigen::Vector2d(delta / config_.dt);
  Vector a(2);
  a << velocity.x(), velocity.y();
  return a;
}

Episode point_manip_demonstration(PointManipEnv& env, std::uint64_t seed, int corridor,
                                  double action_noise) {
  const PointManipExpert expert(env.config());
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  Episode episode;
  State s = env.reset(seed);
  while (!env.done()) {
    Vector a = expert.act(s, corridor);
    if (action_noise > 0.0) {
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += action_noise * noise(rng);
    }
    a = env.bounds().clip(a);
    const StepResult r = env.step(a);
    episode.steps.push_back(
        StepRecord{s, a, r.reward, r.terminated, r.success, false, Source::Intervention});
    s = r.state;
  }
  episode.final_state = s;
  return episode;
}

InterventionOracle point_manip_oracle(const PointManipConfig& config, double margin,
                                      int stall_window, double stall_min_progress) {
  InterventionOracle oracle;
  const PointManipExpert expert(config);
  oracle.expert = [expert](const Environment&, const State& s) { return expert.act(s); };
  oracle.takeover = [margin, stall_window, stall_min_progress](
                        const Environment& env, const State& s,
                        const std::vector<double>& history) {
    const auto* pm = dynamic_cast<const PointManipEnv*>(&env);
    if (pm != nullptr && pm->unsafe_distance(s) < margin) return true;
    const int n = static_cast<int>(history.size());
    if (stall_window > 0 && n > stall_window) {
      return history[n - 1] - history[n - 1 - stall_window] < stall_min_progress;
    }
    return false;
  };
  oracle.max_takeovers = 1;
  return oracle;
}

}  // namespace aloe
