#include "aloe/core.hpp"

#include <cmath>
#include <stdexcept>

namespace aloe {

bool State::operator==(const State& other) const {
  return task_id == other.task_id && obs.size() == other.obs.size() && obs == other.obs;
}

ActionChunk::ActionChunk(Matrix a, int valid) : actions(std::move(a)), valid_len(valid) {
  if (valid_len < 1 || valid_len > horizon()) {
    throw std::invalid_argument("ActionChunk: valid_len must lie in [1, h]");
  }
}

ActionChunk::ActionChunk(Matrix a) : ActionChunk(a, static_cast<int>(a.rows())) {}

Vector ActionChunk::flattened() const {
  Vector flat(actions.size());
  int k = 0;
  for (int t = 0; t < horizon(); ++t) {
    for (int j = 0; j < action_dim(); ++j) flat[k++] = actions(t, j);
  }
  return flat;
}

ActionChunk ActionChunk::from_flat(const Vector& flat, int horizon, int action_dim) {
  if (flat.size() != horizon * action_dim) {
    throw std::invalid_argument("ActionChunk::from_flat: size mismatch");
  }
  Matrix a(horizon, action_dim);
  int k = 0;
  for (int t = 0; t < horizon; ++t) {
    for (int j = 0; j < action_dim; ++j) a(t, j) = flat[k++];
  }
  return ActionChunk(std::move(a));
}

bool ActionChunk::operator==(const ActionChunk& other) const {
  return valid_len == other.valid_len && actions.rows() == other.actions.rows() &&
         actions.cols() == other.actions.cols() && actions == other.actions;
}

std::string to_string(Source source) {
  return source == Source::PolicyRollout ? "PolicyRollout" : "Intervention";
}

Source source_from_string(std::string_view text) {
  if (text == "PolicyRollout") return Source::PolicyRollout;
  if (text == "Intervention") return Source::Intervention;
  throw std::invalid_argument("unknown source label: " + std::string(text));
}

void TransitionSegment::validate() const {
  if (chunk.valid_len < 1 || chunk.valid_len > chunk.horizon()) {
    throw std::invalid_argument("segment: valid_len outside [1, h]");
  }
  if (static_cast<int>(rewards.size()) != chunk.valid_len) {
    throw std::invalid_argument("segment: rewards length differs from valid_len");
  }
  if (success && !terminated) throw std::invalid_argument("segment: success without termination");
  if (handover && !terminated) throw std::invalid_argument("segment: handover without termination");
  if (handover && success) throw std::invalid_argument("segment: handover marked as success");
}

double TransitionSegment::reward_sum() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

bool TransitionSegment::operator==(const TransitionSegment& other) const {
  return state == other.state && chunk == other.chunk && rewards == other.rewards &&
         next_state == other.next_state && terminated == other.terminated &&
         success == other.success && handover == other.handover && source == other.source &&
         episode == other.episode && start_step == other.start_step &&
         iteration == other.iteration;
}

double step_reward(bool success, bool failure, bool terminal, const RewardSpec& spec) {
  if (success && failure) throw std::invalid_argument("step_reward: success and failure both set");
  if ((success || failure) && !terminal) {
    throw std::invalid_argument("step_reward: outcome reported on a non-terminal step");
  }
  if (terminal && success) return 0.0;
  if (terminal && failure) return -spec.c_fail;
  return spec.step_penalty;
}

double discounted_sum(const std::vector<double>& rewards, double gamma) {
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

Vector task_one_hot(int task_id, int num_tasks) {
  if (task_id < 0 || task_id >= num_tasks) throw std::out_of_range("task_id outside task table");
  Vector v = Vector::Zero(num_tasks);
  v[task_id] = 1.0;
  return v;
}

}  // namespace aloe
