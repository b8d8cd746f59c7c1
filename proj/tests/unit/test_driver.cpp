#include <cmath>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "ccbo/driver.hpp"
#include "ccbo/errors.hpp"
#include "ccbo/history.hpp"
#include "ccbo/optimizers.hpp"
#include "oracles.hpp"

using namespace ccbo;

namespace {

RunConfig small_config(Algorithm algorithm, int iterations, std::uint64_t seed = 3) {
  RunConfig c;
  c.algorithm = algorithm;
  c.max_iterations = iterations;
  c.seed = seed;
  c.M = 40;
  c.N = 60;
  c.gp_restarts = 1;
  c.budgets.evaluations_per_dim = 30;
  c.budgets.acquisition_starts = 2;
  c.budgets.sampling_starts = 2;
  return c;
}

std::string serialize(const RunHistory& h) {
  std::ostringstream out;
  write_history(h, out);
  return out.str();
}

}  // namespace

TEST(Algorithm, Names) {
  EXPECT_EQ(algorithm_from_string("EFISUR"), Algorithm::efisur);
  EXPECT_EQ(algorithm_from_string("EFIrand"), Algorithm::efirand);
  EXPECT_EQ(algorithm_from_string("cEIdevNum"), Algorithm::ceidevnum);
  for (auto a : {Algorithm::efisur, Algorithm::efirand, Algorithm::ceidevnum})
    EXPECT_EQ(algorithm_from_string(to_string(a)), a);
  EXPECT_THROW(algorithm_from_string("sur"), ConfigError);
}

TEST(RunConfig, Validation) {
  const auto p = analytical_benchmark();
  RunConfig c;
  EXPECT_NO_THROW(c.validate(p));
  c.initial_doe_size = 5;
  EXPECT_THROW(c.validate(p), ConfigError);
  c = RunConfig{};
  c.max_iterations = -1;
  EXPECT_THROW(c.validate(p), ConfigError);
  c = RunConfig{};
  c.budgets.evaluations_per_dim = 2;
  EXPECT_THROW(c.validate(p), ConfigError);
  c = RunConfig{};
  c.M = 1;
  EXPECT_THROW(c.validate(p), ConfigError);
}

TEST(RunConfig, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.initial_doe_size, 8);
  EXPECT_EQ(c.max_iterations, 56);
  EXPECT_EQ(c.M, 300);
  EXPECT_EQ(c.N, 1000);
  EXPECT_EQ(c.K, 20);
}

TEST(Run, ZeroIterationsKeepsDoe) {
  const auto p = analytical_benchmark();
  for (auto a : {Algorithm::efisur, Algorithm::efirand, Algorithm::ceidevnum}) {
    const auto h = run(p, small_config(a, 0));
    EXPECT_EQ(h.iterations(), 0);
    EXPECT_EQ(h.final_design.size(), 8u);
    EXPECT_EQ(h.incumbents.size(), 1u);
    EXPECT_TRUE(p.x_in_bounds(h.incumbents[0].x));
  }
}

TEST(Run, DesignGrowsByOnePerIteration) {
  const auto p = analytical_benchmark();
  auto c = small_config(Algorithm::efirand, 56);
  c.M = 20;
  c.N = 30;
  c.budgets.evaluations_per_dim = 10;
  const auto h = run(p, c);
  EXPECT_EQ(h.final_design.size(), 64u);
  EXPECT_EQ(h.incumbents.size(), 57u);
  for (const auto& r : h.records) {
    EXPECT_TRUE(p.dist_u().in_support(r.u_next));
    EXPECT_TRUE(p.x_in_bounds(r.x_targ));
    EXPECT_TRUE(p.x_in_bounds(r.x_at_incumbent));
  }
}

TEST(Run, DeterministicPerSeed) {
  const auto p = analytical_benchmark();
  for (auto a : {Algorithm::efisur, Algorithm::efirand, Algorithm::ceidevnum}) {
    const auto c = small_config(a, 3);
    EXPECT_EQ(serialize(run(p, c)), serialize(run(p, c))) << to_string(a);
  }
}

TEST(Run, SeedsChangeStochasticRuns) {
  const auto p = analytical_benchmark();
  const auto a = run(p, small_config(Algorithm::efirand, 2, 1));
  const auto b = run(p, small_config(Algorithm::efirand, 2, 2));
  EXPECT_NE(serialize(a), serialize(b));
}

TEST(Run, EfisurAndEfirandShareTheDesignStep) {
  const auto p = analytical_benchmark();
  const auto sur = run(p, small_config(Algorithm::efisur, 1));
  const auto rnd = run(p, small_config(Algorithm::efirand, 1));
  ASSERT_EQ(sur.iterations(), 1);
  ASSERT_EQ(rnd.iterations(), 1);
  EXPECT_EQ(sur.records[0].x_targ, rnd.records[0].x_targ);
  EXPECT_EQ(sur.records[0].efi_value, rnd.records[0].efi_value);
  EXPECT_NE(sur.records[0].u_next, rnd.records[0].u_next);
}

TEST(Run, StubbedSamplingOnlyChangesU) {
  const auto p = analytical_benchmark();
  const auto config = small_config(Algorithm::efisur, 1);
  auto select_x = [&](const ProblemSpec& q, const ModelState& s, int t) { return select_x_by_efi(q, s, config, t); };
  const auto stub = run_loop(p, config, select_x, [](const ProblemSpec&, const ModelState&, const Vec&, int) {
    return std::pair<Vec, double>{Vec::Constant(2, 0.25), 0.0};
  });
  const auto sur = run(p, config);
  EXPECT_EQ(stub.records[0].x_targ, sur.records[0].x_targ);
  EXPECT_EQ(stub.records[0].u_next, p.denormalize_u(Vec::Constant(2, 0.25)));
}

TEST(Run, DuplicatePointFallsBackToFreshU) {
  const auto p = analytical_benchmark();
  const auto config = small_config(Algorithm::efisur, 3);
  // Always ask for the same joint point.
  auto fixed_x = [](const ProblemSpec&, const ModelState&, int) { return StepChoice{Vec::Constant(2, 0.5), 0.0, "stub"}; };
  auto fixed_u = [](const ProblemSpec&, const ModelState&, const Vec&, int) {
    return std::pair<Vec, double>{Vec::Constant(2, 0.5), 0.0};
  };
  const auto h = run_loop(p, config, fixed_x, fixed_u);
  ASSERT_EQ(h.iterations(), 3);
  EXPECT_EQ(h.records[0].solver_status, "stub");
  EXPECT_EQ(h.records[1].solver_status, "stub+duplicate_u");
  EXPECT_NE(h.records[1].u_next, h.records[0].u_next);
  EXPECT_EQ(h.final_design.size(), 11u);
}

TEST(ConstrainedEi, InactiveConstraintReducesToEi) {
  // Constraint far below zero everywhere.
  auto dist = std::make_shared<IndependentUniform>(std::vector<Interval>{{-5, 5}, {-5, 5}});
  const auto bench = analytical_benchmark();
  ProblemSpec p("loose", {{-5, 5}, {-5, 5}}, dist, 0.05, bench.objective(),
                {[](const Vec& x, const Vec& u) { return -10.0 - 0.01 * (x.sum() + u.sum()); }});
  auto config = small_config(Algorithm::ceidevnum, 0);
  config.budgets.evaluations_per_dim = 150;
  const auto design = oracle::sobol_design(p, 12);
  auto crn = std::make_shared<const CrnSet>(make_crn(p, 40, 10, 1));
  const ModelState state = build_models(p, design, crn, 1);
  const auto choice = select_x_by_constrained_ei(p, state, config, 1);
  const auto plain = maximize_unconstrained([&](const Vec& x) { return expected_improvement_z(*state.acquisition, x); },
                                            BoxDomain::unit(2), 300, 5, 9);
  EXPECT_GE(choice.acquisition_value, 0.98 * plain.best_value);
  EXPECT_LT(empirical_quantile_constraint(*state.acquisition, choice.x_unit, 0), 0.0);
}

TEST(DeviationNumberStep, AgreesWithGridSearch) {
  const auto p = analytical_benchmark();
  const auto design = oracle::sobol_design(p, 14, 3);
  auto crn = std::make_shared<const CrnSet>(make_crn(p, 40, 10, 1));
  const ModelState state = build_models(p, design, crn, 1);
  auto config = small_config(Algorithm::ceidevnum, 0);
  config.budgets.evaluations_per_dim = 100;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 4; ++trial) {
    const Vec x = oracle::uniform_point(rng, 2);
    double grid_best = std::numeric_limits<double>::infinity();
    Vec grid_u;
    for (int a = 0; a < 30; ++a)
      for (int b = 0; b < 30; ++b) {
        const Vec u{{a / 29.0, b / 29.0}};
        const double v = deviation_number(*state.acquisition, x, u);
        if (v < grid_best) {
          grid_best = v;
          grid_u = u;
        }
      }
    const auto [u, value] = select_u_by_deviation_number(p, state, x, config, trial + 1);
    EXPECT_NEAR(value, deviation_number(*state.acquisition, x, u), 1e-12);
    EXPECT_TRUE(value <= grid_best + 1e-3 || (u - grid_u).lpNorm<Eigen::Infinity>() <= 1.0 / 29.0)
        << "solver " << value << " grid " << grid_best;
  }
}

TEST(BuildModels, IncumbentFromObservedDesigns) {
  const auto p = analytical_benchmark();
  const auto design = oracle::sobol_design(p, 16);
  auto crn = std::make_shared<const CrnSet>(make_crn(p, 50, 20, 2));
  const ModelState state = build_models(p, design, crn, 1);
  ASSERT_TRUE(state.acquisition->z_min_feas().has_value());
  EXPECT_EQ(*state.acquisition->z_min_feas(), state.incumbent.z_min_feas);
  bool observed = false;
  for (const Vec& x : design.distinct_designs()) observed = observed || (p.normalize_x(x) - state.incumbent.x).norm() < 1e-12;
  EXPECT_TRUE(observed);
}
