#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "ccbo/errors.hpp"
#include "ccbo/problem.hpp"
#include "oracles.hpp"

using namespace ccbo;

namespace {

Vec v2(double a, double b) { return Vec{{a, b}}; }

}  // namespace

TEST(AnalyticBenchmark, OriginEvaluation) {
  const auto p = analytical_benchmark();
  const auto e = evaluate(p, v2(0, 0), v2(0, 0));
  EXPECT_DOUBLE_EQ(e.f, 0.0);
  ASSERT_EQ(e.g.size(), 1);
  EXPECT_DOUBLE_EQ(e.g[0], -1.0);
}

TEST(AnalyticBenchmark, UnitDesignEvaluation) {
  const auto p = analytical_benchmark();
  const auto e = evaluate(p, v2(1, 0), v2(0, 0));
  EXPECT_DOUBLE_EQ(e.f, 10.0);
  EXPECT_DOUBLE_EQ(e.g[0], -2.0);
}

TEST(AnalyticBenchmark, ReferencePointBySubstitution) {
  const auto p = analytical_benchmark();
  const double x1 = -3.62069, x2 = -1.896552;
  const auto e = evaluate(p, v2(x1, x2), v2(0, 0));
  EXPECT_NEAR(e.g[0], -x1 * x1 + 5 * x2 - 1, 1e-12);
  EXPECT_NEAR(e.g[0], -23.5922, 1e-3);
  EXPECT_NEAR(e.f, 5 * (x1 * x1 + x2 * x2) + 5 * x1 + 3 * x2, 1e-12);
}

TEST(AnalyticBenchmark, Declaration) {
  const auto p = analytical_benchmark();
  EXPECT_DOUBLE_EQ(p.alpha(), 0.05);
  EXPECT_EQ(p.dim_x(), 2);
  EXPECT_EQ(p.dim_u(), 2);
  EXPECT_EQ(p.num_constraints(), 1);
  ASSERT_TRUE(p.reference_x().has_value());
  EXPECT_NEAR((*p.reference_x() - v2(-3.62069, -1.896552)).norm(), 0.0, 1e-12);
  EXPECT_EQ(problem_by_name("analytic-2x2").name(), "analytic-2x2");
  EXPECT_THROW(problem_by_name("nope"), ConfigError);
}

TEST(AnalyticBenchmark, MeanObjectiveAtOrigin) {
  EXPECT_NEAR(oracle::benchmark_mean_objective_quadrature(v2(0, 0)), -50.0 / 3.0, 1e-9);
}

TEST(AnalyticBenchmark, MeanObjectiveClosedForm) {
  for (const Vec& x : {v2(-3.62069, -1.896552), v2(2.0, -4.0), v2(0.5, 3.0)}) {
    const double closed = 5 * x.squaredNorm() - 50.0 / 3.0 + 5 * x[0] + 3 * x[1];
    EXPECT_NEAR(oracle::benchmark_mean_objective_quadrature(x), closed, 1e-9);
  }
}

TEST(AnalyticBenchmark, FeasibilityAtReference) {
  EXPECT_NEAR(oracle::benchmark_feasibility_exact(v2(-3.62069, -1.896552)), 0.957, 1e-3);
}

TEST(AnalyticBenchmark, FeasibilityOracleAgreesWithMonteCarlo) {
  const auto p = analytical_benchmark();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5, 5);
  const Vec x = v2(-2.0, -0.5);
  int hits = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) hits += p.constraint(0)(x, v2(u(rng), u(rng))) <= 0 ? 1 : 0;
  const double mc = static_cast<double>(hits) / n;
  const double exact = oracle::benchmark_feasibility_exact(x);
  EXPECT_NEAR(mc, exact, 4 * std::sqrt(exact * (1 - exact) / n) + 1e-12);
}

TEST(ReferenceSolution, FindsPublishedOptimum) {
  const auto p = analytical_benchmark();
  const auto ref = reference_solution(p, 30, 1 << 14, 0);
  ASSERT_TRUE(ref.has_value());
  EXPECT_LE((ref->x - *p.reference_x()).norm(), 0.15);
  EXPECT_GE(ref->feasibility, 0.95);
  const double closed = 5 * ref->x.squaredNorm() - 50.0 / 3.0 + 5 * ref->x[0] + 3 * ref->x[1];
  EXPECT_NEAR(ref->mean_objective, closed, 0.5);
}

TEST(ReferenceSolution, RefinementNeverRegresses) {
  const auto p = analytical_benchmark();
  const auto coarse = reference_solution(p, 12, 4096, 0);
  const auto fine = reference_solution(p, 12, 4096, 2);
  ASSERT_TRUE(coarse && fine);
  EXPECT_LE(fine->mean_objective, coarse->mean_objective + 1e-12);
  EXPECT_GE(fine->feasibility, 0.95);
}

// E[f] = 5 |x - c|^2 + const with c = (-0.5, -0.3), so the chance-constrained
// optimum is the feasible design closest to c. Scan directions around c and
// bisect the exact feasibility probability along each ray.
Vec continuous_optimum_oracle() {
  const Vec c{{-0.5, -0.3}};
  auto feasible = [](const Vec& x) { return oracle::benchmark_feasibility_exact(x) >= 0.95; };
  auto radius = [&](double theta) {
    const Vec dir{{std::cos(theta), std::sin(theta)}};
    double lo = 0.0, hi = 0.0;
    for (double r = 0.05; r < 8.0; r += 0.05) {
      const Vec x = c + r * dir;
      if (x.cwiseAbs().maxCoeff() > 5.0) return std::numeric_limits<double>::infinity();
      if (feasible(x)) {
        hi = r;
        break;
      }
      lo = r;
    }
    if (hi == 0.0) return std::numeric_limits<double>::infinity();
    for (int k = 0; k < 50; ++k) {
      const double mid = 0.5 * (lo + hi);
      (feasible(c + mid * dir) ? hi : lo) = mid;
    }
    return hi;
  };
  double best_theta = 0.0, best_r = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 720; ++k) {
    const double theta = 2.0 * M_PI * k / 720.0;
    if (const double r = radius(theta); r < best_r) best_r = r, best_theta = theta;
  }
  double a = best_theta - 2.0 * M_PI / 720.0, b = best_theta + 2.0 * M_PI / 720.0;
  for (int k = 0; k < 60; ++k) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (radius(m1) < radius(m2)) b = m2;
    else a = m1;
  }
  const double theta = 0.5 * (a + b);
  return c + radius(theta) * Vec{{std::cos(theta), std::sin(theta)}};
}

TEST(ReferenceSolution, RefinementReachesContinuousOptimum) {
  const Vec opt = continuous_optimum_oracle();
  EXPECT_NEAR(oracle::benchmark_feasibility_exact(opt), 0.95, 1e-6);
  // The 30-point grid winner is a lattice artefact well away from it.
  EXPECT_GT((opt - *analytical_benchmark().reference_x()).norm(), 0.5);
  const auto ref = reference_solution(analytical_benchmark(), 30, 1 << 16, 4);
  ASSERT_TRUE(ref);
  EXPECT_LE((ref->x - opt).norm(), 0.05) << ref->x.transpose() << " vs " << opt.transpose();
}

TEST(ReferenceSolution, InfeasibleProblemHasNone) {
  auto dist = std::make_shared<IndependentUniform>(std::vector<Interval>{{0, 1}});
  ProblemSpec p("inf", {{0, 1}}, dist, 0.05, [](const Vec& x, const Vec&) { return x[0]; },
                {[](const Vec&, const Vec&) { return 1.0; }});
  EXPECT_FALSE(reference_solution(p, 10, 256, 0).has_value());
}

TEST(ProblemSpec, RejectsInvalidDeclarations) {
  auto dist = std::make_shared<IndependentUniform>(std::vector<Interval>{{0, 1}});
  auto f = [](const Vec&, const Vec&) { return 0.0; };
  EXPECT_THROW(ProblemSpec("p", {{0, 1}}, dist, 0.0, f, {f}), PreconditionError);
  EXPECT_THROW(ProblemSpec("p", {{0, 1}}, dist, 1.0, f, {f}), PreconditionError);
  EXPECT_THROW(ProblemSpec("p", {{1, 0}}, dist, 0.1, f, {f}), PreconditionError);
  EXPECT_THROW(ProblemSpec("p", {}, dist, 0.1, f, {f}), PreconditionError);
  EXPECT_THROW(ProblemSpec("p", {{0, 1}}, dist, 0.1, f, {}), PreconditionError);
  EXPECT_THROW(IndependentUniform({{0, INFINITY}}), PreconditionError);
}

TEST(ProblemSpec, EvaluateRejectsOutOfDomain) {
  const auto p = analytical_benchmark();
  EXPECT_THROW(evaluate(p, v2(6, 0), v2(0, 0)), DomainError);
  EXPECT_THROW(evaluate(p, v2(0, 0), v2(0, -5.5)), DomainError);
  EXPECT_NO_THROW(evaluate(p, v2(5, -5), v2(-5, 5)));
}

TEST(ProblemSpec, NormalizationRoundTrip) {
  const auto p = analytical_benchmark();
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Vec x = p.denormalize_x(oracle::uniform_point(rng, 2));
    EXPECT_LT((p.denormalize_x(p.normalize_x(x)) - x).norm(), 1e-12);
    const Vec j = p.to_joint(x, v2(0, 0));
    EXPECT_TRUE((j.array() >= 0).all() && (j.array() <= 1).all());
    EXPECT_DOUBLE_EQ(j[2], 0.5);
  }
}

TEST(IndependentUniform, DensityMeanInverse) {
  IndependentUniform u({{-5, 5}, {0, 2}});
  EXPECT_DOUBLE_EQ(u.density(v2(0, 1)), 1.0 / 20.0);
  EXPECT_DOUBLE_EQ(u.density(v2(6, 1)), 0.0);
  EXPECT_LT((u.mean() - v2(0, 1)).norm(), 1e-15);
  EXPECT_LT((u.inverse_cdf(v2(0.5, 0.5)) - v2(0, 1)).norm(), 1e-15);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) EXPECT_TRUE(u.in_support(u.sample(rng)));
}

TEST(JointDesign, RejectsDuplicates) {
  const auto p = analytical_benchmark();
  JointDesign d;
  d.append(p, evaluate(p, v2(1, 1), v2(0, 0)));
  d.append(p, evaluate(p, v2(1, 1), v2(0, 1)));
  EXPECT_THROW(d.append(p, evaluate(p, v2(1, 1), v2(0, 0))), PreconditionError);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.distinct_designs().size(), 1u);
  EXPECT_TRUE(d.contains(p, v2(1, 1), v2(0, 1)));
  EXPECT_EQ(d.joint_inputs(p).rows(), 2);
  EXPECT_DOUBLE_EQ(d.constraint_values(0)[0], d[0].g[0]);
}
