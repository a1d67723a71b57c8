#include "aloe/optim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace aloe {

void OptimConfig::validate() const {
  if (!(peak_lr > 0.0)) throw std::invalid_argument("optim: peak_lr must be positive");
  if (warmup_steps < 0 || total_steps < 1) throw std::invalid_argument("optim: bad step counts");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optim: betas must lie in [0, 1)");
  }
  if (weight_decay < 0.0 || eps <= 0.0) throw std::invalid_argument("optim: bad eps/weight decay");
}

double learning_rate(const OptimConfig& c, long step) {
  if (step < 0) step = 0;
  if (step < c.warmup_steps) {
    return c.peak_lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  const long decay_steps = c.total_steps - c.warmup_steps;
  if (decay_steps <= 0) return step <= c.warmup_steps ? c.peak_lr : 0.0;
  const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / decay_steps);
  return 0.5 * c.peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_by_global_norm(std::vector<Vector>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

AdamW::AdamW(OptimConfig config, const std::vector<const Vector*>& params)
    : config_(config) {
  config_.validate();
  for (const Vector* p : params) {
    m_.push_back(Vector::Zero(p->size()));
    v_.push_back(Vector::Zero(p->size()));
  }
}

double AdamW::step(const std::vector<Vector*>& params, std::vector<Vector> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("AdamW::step: block count mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != m_[i].size() || params[i]->size() != m_[i].size()) {
      throw std::invalid_argument("AdamW::step: block shape mismatch");
    }
    if (!grads[i].allFinite()) {
      std::ostringstream msg;
      msg << "non-finite gradient in parameter block " << i << " at update " << updates_
          << " (parameter norm " << params[i]->norm() << ")";
      throw NumericalError(msg.str());
    }
  }
  const double norm = clip_by_global_norm(grads, config_.grad_clip_norm);
  const double lr = learning_rate(config_, schedule_step_);
  ++updates_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(updates_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(updates_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    Vector& p = *params[i];
    if (config_.weight_decay > 0.0) p *= (1.0 - lr * config_.weight_decay);
    p.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
  ++schedule_step_;
  return norm;
}

void AdamW::restart_schedule(int total_steps) {
  config_.total_steps = total_steps;
  config_.validate();
  schedule_step_ = 0;
}

}  // namespace aloe
