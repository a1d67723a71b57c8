#include "aloe/theory.hpp"

#include <boost/math/tools/roots.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace aloe;

namespace {

// Reference tilt computed with long double and no max subtraction; only
// valid for moderate Q / beta.
Vector reference_tilt(const Vector& q, const Vector& ref, double beta) {
  std::vector<long double> w(static_cast<std::size_t>(q.size()));
  long double z = 0.0L;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    w[static_cast<std::size_t>(i)] = static_cast<long double>(ref[i]) * std::exp(static_cast<long double>(q[i]) / beta);
    z += w[static_cast<std::size_t>(i)];
  }
  Vector p(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) p[i] = static_cast<double>(w[static_cast<std::size_t>(i)] / z);
  return p;
}

double reference_kl(const Vector& p, const Vector& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) kl += p[i] > 0 ? p[i] * std::log(p[i] / q[i]) : 0.0;
  return kl;
}

}  // namespace

TEST(Gibbs, ThreeActionHandExample) {
  Vector q(3), ref = Vector::Constant(3, 1.0 / 3.0);
  q << 1.0, 0.0, -1.0;
  const Vector p = gibbs_solution(q, ref, 0.5);
  const double z = std::exp(2.0) + 1.0 + std::exp(-2.0);
  EXPECT_NEAR(p[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(p[0], 0.8668, 5e-5);
  EXPECT_NEAR(p[1], 0.1173, 5e-5);
  EXPECT_NEAR(p[2], 0.0159, 5e-5);
}

TEST(Gibbs, LimitsAndConstantValues) {
  Vector q(4), ref(4);
  q << 0.3, -2.0, 1.5, 1.5;
  ref << 0.1, 0.2, 0.3, 0.4;
  EXPECT_EQ(gibbs_solution(q, ref, std::numeric_limits<double>::infinity()), ref);
  EXPECT_LT(total_variation(gibbs_solution(q, ref, 1e9), ref), 1e-8);
  const Vector greedy = gibbs_solution(q, ref, 0.0);
  EXPECT_NEAR(greedy[2], 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(greedy[3], 4.0 / 7.0, 1e-15);
  EXPECT_LT(total_variation(gibbs_solution(Vector::Constant(4, -3.0), ref, 0.2), ref), 1e-15);
}

TEST(Gibbs, LargeValuesDoNotOverflow) {
  Vector q(2), ref = Vector::Constant(2, 0.5);
  q << 1e4, 1e4 - 1.0;
  const Vector p = gibbs_solution(q, ref, 1e-2);
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p[0], 1.0, 1e-15);
}

TEST(Gibbs, MatchesReferenceTilt) {
  Rng rng(0);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteInstance inst = random_instance(2 + trial % 9, rng);
    EXPECT_LT(total_variation(gibbs_solution(inst), reference_tilt(inst.q, inst.ref, inst.beta)), 1e-12);
  }
}

TEST(Theorem, ThreeActionWeightedMaximumLikelihood) {
  DiscreteInstance inst;
  inst.q = Vector(3);
  inst.q << 1.0, 0.0, -1.0;
  inst.ref = Vector::Constant(3, 1.0 / 3.0);
  inst.beta = 0.5;
  const TheoremReport r = verify_theorem(inst, 1e-9);
  EXPECT_LE(r.tv_weighted_ml, 1e-9);
  EXPECT_LE(r.tv_advantage_shift, 1e-9);
  EXPECT_TRUE(r.passed);
}

TEST(Theorem, ShiftInvariance) {
  Rng rng(1);
  DiscreteInstance inst = random_instance(6, rng);
  const Vector base = gibbs_solution(inst);
  inst.q.array() += 100.0;
  EXPECT_LT(total_variation(gibbs_solution(inst), base), 1e-12);
  EXPECT_TRUE(verify_theorem(inst, 1e-6).passed);
}

TEST(Theorem, FiftyRandomTenActionInstancesPass) {
  Rng rng(2024);
  for (int i = 0; i < 50; ++i) {
    const DiscreteInstance inst = random_instance(10, rng);
    const TheoremReport r = verify_theorem(inst, 1e-6);
    EXPECT_TRUE(r.passed) << "instance " << i << ": " << r.to_json().dump();
    EXPECT_GE(r.tv_clipped, 0.0);
  }
}

TEST(Theorem, ClippingIsReportedNotAsserted) {
  DiscreteInstance inst;
  inst.q = Vector(3);
  inst.q << 10.0, 0.0, -10.0;
  inst.ref = Vector::Constant(3, 1.0 / 3.0);
  inst.beta = 1.0;
  const TheoremReport r = verify_theorem(inst, 1e-6, 2.0);
  EXPECT_TRUE(r.passed);
  EXPECT_GT(r.tv_clipped, 1e-3);
}

TEST(ConstrainedSolver, SlackBudgetIsGreedy) {
  Vector q(3), ref(3);
  q << 0.0, 2.0, 1.0;
  ref << 0.2, 0.5, 0.3;
  const ConstrainedSolution s = constrained_solver(q, ref, std::log(2.0) + 1e-9);  // KL of the argmax point mass
  EXPECT_TRUE(s.greedy_limit);
  EXPECT_EQ(s.pi[1], 1.0);
}

TEST(ConstrainedSolver, TightBudgetApproachesReference) {
  Vector q(3), ref(3);
  q << 0.0, 2.0, 1.0;
  ref << 0.2, 0.5, 0.3;
  const ConstrainedSolution s = constrained_solver(q, ref, 1e-12);
  EXPECT_LT(total_variation(s.pi, ref), 1e-5);
  EXPECT_THROW(constrained_solver(q, ref, 0.0), std::invalid_argument);
}

TEST(ConstrainedSolver, DualMatchesIndependentRootFinder) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteInstance inst = random_instance(2 + trial % 9, rng);
    const ConstrainedSolution s = constrained_solver(inst.q, inst.ref, inst.kl_budget);
    if (s.greedy_limit) {
      EXPECT_LE(reference_kl(s.pi, inst.ref), inst.kl_budget);
      continue;
    }
    EXPECT_LE(s.kl_residual, 1e-10);
    const auto f = [&](double log_beta) {
      return reference_kl(reference_tilt(inst.q, inst.ref, std::exp(log_beta)), inst.ref) - inst.kl_budget;
    };
    boost::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        f, -8.0, 12.0, boost::math::tools::eps_tolerance<double>(50), iters);
    const Vector oracle = reference_tilt(inst.q, inst.ref, std::exp(0.5 * (lo + hi)));
    EXPECT_LT(total_variation(s.pi, oracle), 1e-6) << "trial " << trial;
  }
}

TEST(ConstrainedSolver, BeatsGridSearchOverTemperature) {
  // Best feasible tilt on a 1e-4 grid of log beta is never better than the solver.
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteInstance inst = random_instance(5, rng);
    const ConstrainedSolution s = constrained_solver(inst.q, inst.ref, inst.kl_budget);
    const double solver_value = expected_value(s.pi, inst.q);
    double best = -std::numeric_limits<double>::infinity();
    Vector best_pi;
    for (double lb = -6.0; lb <= 8.0; lb += 1e-4) {
      const Vector p = reference_tilt(inst.q, inst.ref, std::exp(lb));
      if (reference_kl(p, inst.ref) > inst.kl_budget) continue;
      const double v = p.dot(inst.q);
      if (v > best) {
        best = v;
        best_pi = p;
      }
    }
    ASSERT_GT(best_pi.size(), 0);
    EXPECT_GE(solver_value, best - 1e-9) << "trial " << trial;
    if (!s.greedy_limit) EXPECT_LT(total_variation(s.pi, best_pi), 1e-3);
  }
}

TEST(ConstrainedSolver, DualMonotonicity) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteInstance inst = random_instance(7, rng);
    double last = std::numeric_limits<double>::infinity();
    for (double lb = -5.0; lb <= 5.0; lb += 0.05) {
      const double kl = kl_divergence(gibbs_solution(inst.q, inst.ref, std::exp(lb)), inst.ref);
      EXPECT_LE(kl, last + 1e-15);
      last = kl;
    }
  }
}

TEST(ConstrainedSolver, DominatesRandomFeasibleCandidates) {
  Rng rng(6);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::uniform_real_distribution<double> mix(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const DiscreteInstance inst = random_instance(6, rng);
    const ConstrainedSolution s = constrained_solver(inst.q, inst.ref, inst.kl_budget);
    const double solver_value = expected_value(s.pi, inst.q);
    int accepted = 0;
    for (int n = 0; n < 100000 && accepted < 1000; ++n) {
      Vector d(6);
      for (auto& x : d) x = gamma(rng);
      d /= d.sum();
      const double t = std::pow(mix(rng), 3.0);
      const Vector cand = (1.0 - t) * inst.ref + t * d;
      if (kl_divergence(cand, inst.ref) > inst.kl_budget) continue;
      ++accepted;
      EXPECT_LE(expected_value(cand, inst.q), solver_value + 1e-9);
    }
    EXPECT_EQ(accepted, 1000);
  }
}
