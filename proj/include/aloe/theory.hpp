#pragma once

// Exact checks of KL-constrained policy improvement on discrete action sets.

#include "aloe/core.hpp"

#include <json.hpp>

namespace aloe {

struct DiscreteInstance {
  Vector q;
  Vector ref;  // strictly positive, sums to 1
  double beta = 1.0;
  double kl_budget = 0.1;

  void validate() const;
};

/// Random instance: Q ~ N(0, scale^2) per action, ref ~ Dirichlet(1).
DiscreteInstance random_instance(int m, Rng& rng, double q_scale = 1.0);

/// pi(a) proportional to ref(a) exp(Q(a) / beta), computed with max
/// subtraction. beta = +inf returns ref; beta = 0 returns ref restricted to
/// the argmax set.
Vector gibbs_solution(const Vector& q, const Vector& ref, double beta);
Vector gibbs_solution(const DiscreteInstance& inst);

double kl_divergence(const Vector& p, const Vector& q);
double total_variation(const Vector& p, const Vector& q);
double expected_value(const Vector& pi, const Vector& q);

struct ConstrainedSolution {
  Vector pi;
  double beta = 0.0;         // dual temperature; 0 in the greedy limit
  bool greedy_limit = false; // budget admits the argmax-restricted reference
  double kl = 0.0;
  double kl_residual = 0.0;  // |KL - budget| when the constraint binds
  int iterations = 0;
};

/// max_pi E_pi[Q] s.t. KL(pi || ref) <= budget, by bisection on log beta.
ConstrainedSolution constrained_solver(const Vector& q, const Vector& ref, double kl_budget,
                                       double tolerance = 1e-10);

struct TheoremReport {
  // (a) normalized weighted empirical distribution with exp(Q / beta) weights vs Gibbs
  double tv_weighted_ml = 0.0;
  // (b) weights from A = Q - V_ref vs weights from Q
  double tv_advantage_shift = 0.0;
  // constrained solver output vs Gibbs at the solver's dual temperature
  double tv_dual = 0.0;
  // reported only: clipped weights exp(clip(A / beta, -c, c)) vs Gibbs
  double tv_clipped = 0.0;
  double eps_clip = 2.0;
  double tolerance = 1e-6;
  bool passed = false;

  nlohmann::json to_json() const;
};

TheoremReport verify_theorem(const DiscreteInstance& inst, double tolerance, double eps_clip = 2.0);

}  // namespace aloe
