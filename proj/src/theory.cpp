#include "aloe/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aloe {

void DiscreteInstance::validate() const {
  if (q.size() < 2) throw std::invalid_argument("discrete instance: need at least 2 actions");
  if (ref.size() != q.size()) throw std::invalid_argument("discrete instance: ref and Q sizes differ");
  if ((ref.array() <= 0.0).any()) throw std::invalid_argument("discrete instance: ref must be strictly positive");
  if (std::abs(ref.sum() - 1.0) > 1e-12) throw std::invalid_argument("discrete instance: ref must sum to 1");
  if (!(beta > 0.0)) throw std::invalid_argument("discrete instance: beta must be positive");
  if (!(kl_budget > 0.0)) throw std::invalid_argument("discrete instance: KL budget must be positive");
}

DiscreteInstance random_instance(int m, Rng& rng, double q_scale) {
  std::normal_distribution<double> normal(0.0, q_scale);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DiscreteInstance inst;
  inst.q.resize(m);
  inst.ref.resize(m);
  for (int i = 0; i < m; ++i) {
    inst.q[i] = normal(rng);
    inst.ref[i] = expo(rng) + 1e-3;
  }
  inst.ref /= inst.ref.sum();
  inst.beta = std::exp(std::log(0.1) + unit(rng) * std::log(50.0));
  inst.kl_budget = std::exp(std::log(1e-3) + unit(rng) * std::log(1e3));
  return inst;
}

Vector gibbs_solution(const Vector& q, const Vector& ref, double beta) {
  if (q.size() != ref.size() || q.size() == 0) throw std::invalid_argument("gibbs_solution: size mismatch");
  if (!(beta >= 0.0)) throw std::invalid_argument("gibbs_solution: beta must be non-negative");
  if (std::isinf(beta)) return ref / ref.sum();
  const double qmax = q.maxCoeff();
  Vector p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (beta == 0.0) {
      p[i] = q[i] == qmax ? ref[i] : 0.0;
    } else {
      p[i] = ref[i] * std::exp((q[i] - qmax) / beta);
    }
  }
  return p / p.sum();
}

Vector gibbs_solution(const DiscreteInstance& inst) {
  inst.validate();
  return gibbs_solution(inst.q, inst.ref, inst.beta);
}

double kl_divergence(const Vector& p, const Vector& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double total_variation(const Vector& p, const Vector& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

double expected_value(const Vector& pi, const Vector& q) { return pi.dot(q); }

ConstrainedSolution constrained_solver(const Vector& q, const Vector& ref, double kl_budget, double tolerance) {
  if (!(kl_budget > 0.0)) throw std::invalid_argument("constrained_solver: KL budget must be positive");
  if (q.size() != ref.size() || q.size() < 2) throw std::invalid_argument("constrained_solver: size mismatch");
  ConstrainedSolution sol;
  const Vector greedy = gibbs_solution(q, ref, 0.0);
  const double greedy_kl = kl_divergence(greedy, ref);
  if (greedy_kl <= kl_budget) {
    sol.pi = greedy;
    sol.greedy_limit = true;
    sol.kl = greedy_kl;
    return sol;
  }

  auto kl_at = [&](double log_beta) { return kl_divergence(gibbs_solution(q, ref, std::exp(log_beta)), ref); };
  // KL(gibbs(beta) || ref) falls as beta grows: lo keeps KL > budget, hi keeps KL <= budget.
  double lo = 0.0, hi = 0.0;
  if (kl_at(0.0) > kl_budget) {
    for (double step = 1.0; kl_at(hi) > kl_budget && hi < 700.0; step *= 2.0) {
      lo = hi;
      hi = std::min(hi + step, 700.0);
    }
  } else {
    for (double step = 1.0; kl_at(lo) <= kl_budget && lo > -700.0; step *= 2.0) {
      hi = lo;
      lo = std::max(lo - step, -700.0);
    }
  }
  for (sol.iterations = 0; sol.iterations < 2000; ++sol.iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double kl = kl_at(mid);
    if (kl > kl_budget) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(kl - kl_budget) <= tolerance && kl <= kl_budget) break;
  }
  sol.beta = std::exp(hi);
  sol.pi = gibbs_solution(q, ref, sol.beta);
  sol.kl = kl_divergence(sol.pi, ref);
  sol.kl_residual = std::abs(sol.kl - kl_budget);
  return sol;
}

nlohmann::json TheoremReport::to_json() const {
  return {{"tv_weighted_ml", tv_weighted_ml}, {"tv_advantage_shift", tv_advantage_shift},
          {"tv_dual", tv_dual},               {"tv_clipped", tv_clipped},
          {"eps_clip", eps_clip},             {"tolerance", tolerance},
          {"passed", passed}};
}

TheoremReport verify_theorem(const DiscreteInstance& inst, double tolerance, double eps_clip) {
  inst.validate();
  TheoremReport r;
  r.tolerance = tolerance;
  r.eps_clip = eps_clip;
  const Vector gibbs = gibbs_solution(inst);

  // Weighted maximum likelihood over the simplex for samples a ~ ref with
  // weights w(a): argmax_pi sum_a ref(a) w(a) log pi(a) = ref * w / Z.
  auto weighted_ml = [&](const Vector& w) {
    Vector p = inst.ref.cwiseProduct(w);
    return Vector(p / p.sum());
  };
  const Vector w_q = (inst.q / inst.beta).array().exp().matrix();
  const Vector from_q = weighted_ml(w_q);
  r.tv_weighted_ml = total_variation(from_q, gibbs);

  const double v_ref = inst.ref.dot(inst.q);
  const Vector adv = (inst.q.array() - v_ref).matrix();
  const Vector from_adv = weighted_ml((adv / inst.beta).array().exp().matrix());
  r.tv_advantage_shift = total_variation(from_adv, from_q);

  const Vector clipped = (adv / inst.beta).cwiseMax(-eps_clip).cwiseMin(eps_clip).array().exp().matrix();
  r.tv_clipped = total_variation(weighted_ml(clipped), gibbs);

  const ConstrainedSolution cs = constrained_solver(inst.q, inst.ref, inst.kl_budget);
  r.tv_dual = total_variation(cs.pi, gibbs_solution(inst.q, inst.ref, cs.beta));
  const bool feasible = cs.kl <= inst.kl_budget + tolerance;

  r.passed = std::isfinite(r.tv_weighted_ml) && r.tv_weighted_ml <= tolerance &&
             r.tv_advantage_shift <= tolerance && r.tv_dual <= tolerance && feasible;
  return r;
}

}  // namespace aloe
