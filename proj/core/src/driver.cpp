#include "ccbo/driver.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "ccbo/errors.hpp"
#include "ccbo/optimizers.hpp"

namespace ccbo {

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::efisur: return "efisur";
    case Algorithm::efirand: return "efirand";
    case Algorithm::ceidevnum: return "ceidevnum";
  }
  return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "efisur") return Algorithm::efisur;
  if (lower == "efirand") return Algorithm::efirand;
  if (lower == "ceidevnum") return Algorithm::ceidevnum;
  throw ConfigError(fmt::format("unknown algorithm '{}' (expected efisur, efirand or ceidevnum)", name));
}

void RunConfig::validate(const ProblemSpec& problem) const {
  const int joint = problem.dim_joint();
  if (initial_doe_size < joint + 2)
    throw ConfigError(fmt::format("initial_doe_size must be at least d + m + 2 = {}", joint + 2));
  if (max_iterations < 0) throw ConfigError("max_iterations must be nonnegative");
  if (M < 2 || N < 2) throw ConfigError("M and N must be at least 2");
  if (K < 1) throw ConfigError("quantizer size K must be at least 1");
  if (gp_restarts < 1) throw ConfigError("gp_restarts must be at least 1");
  if (budgets.evaluations_per_dim < 3) throw ConfigError("evaluations_per_dim must be at least 3");
  if (budgets.acquisition_starts < 1 || budgets.sampling_starts < 1)
    throw ConfigError("solver starts must be at least 1");
}

namespace {

// Independent streams derived from the run seed.
enum Stream : std::uint64_t { kDesignStream = 1, kFitStream, kAcquisitionStream, kSamplingStream, kRandomUStream };

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

std::shared_ptr<const GpPosterior> fit_or_reuse(const Mat& X, const Vec& y, int restarts, std::uint64_t seed,
                                                const GpPosterior* previous, const char* what) {
  try {
    FitOptions options;
    options.restarts = restarts;
    options.seed = seed;
    return std::make_shared<const GpPosterior>(fit(X, y, options));
  } catch (const ModelError&) {
    if (!previous) throw RunError(fmt::format("{} model fit failed", what));
  }
  try {
    return std::make_shared<const GpPosterior>(GpPosterior::condition(previous->kernel(), X, y));
  } catch (const ModelError& e) {
    throw RunError(fmt::format("{} model could not be conditioned: {}", what, e.what()));
  }
}

IncumbentRecord incumbent_record(const ProblemSpec& problem, const ModelState& state) {
  return {problem.denormalize_x(state.incumbent.x), state.incumbent.z_min_feas, state.incumbent.feasible};
}

constexpr double kDeviationCap = 1e300;

}  // namespace

ModelState build_models(const ProblemSpec& problem, const JointDesign& design, std::shared_ptr<const CrnSet> crn,
                        int gp_restarts, const ModelState* previous) {
  const Mat X = design.joint_inputs(problem);
  const auto n = static_cast<std::uint64_t>(design.size());
  ModelState state;
  state.crn = std::move(crn);
  state.objective = fit_or_reuse(X, design.objective_values(), gp_restarts, derive_seed(n, kFitStream, 0),
                                 previous ? previous->objective.get() : nullptr, "objective");
  for (int i = 0; i < problem.num_constraints(); ++i) {
    const GpPosterior* prev = previous ? previous->constraints.at(i).get() : nullptr;
    state.constraints.push_back(fit_or_reuse(X, design.constraint_values(i), gp_restarts,
                                             derive_seed(n, kFitStream, static_cast<std::uint64_t>(i) + 1), prev,
                                             "constraint"));
  }
  state.z = std::make_shared<const ZProcess>(state.objective, state.crn);
  state.acquisition = std::make_shared<AcquisitionContext>(state.z, state.constraints, state.crn, problem.alpha());

  std::vector<Vec> candidates;
  for (const Vec& x : design.distinct_designs()) candidates.push_back(problem.normalize_x(x));
  state.incumbent = current_feasible_min(*state.acquisition, candidates);
  state.acquisition->set_z_min_feas(state.incumbent.z_min_feas);
  return state;
}

RunHistory run_loop(const ProblemSpec& problem, const RunConfig& config, const DesignSelector& select_x,
                    const UncertaintySelector& select_u) {
  config.validate(problem);
  const int d = problem.dim_x();
  const int m = problem.dim_u();

  RunHistory history;
  history.problem = problem.name();
  history.config = config;

  auto crn = std::make_shared<const CrnSet>(make_crn(problem, config.M, config.N, config.seed));

  JointDesign design;
  for (const Vec& p : latin_hypercube(d + m, config.initial_doe_size, derive_seed(config.seed, kDesignStream)).points) {
    const Vec x = problem.denormalize_x(p.head(d));
    const Vec u = problem.denormalize_u(p.tail(m));
    if (!design.contains(problem, x, u)) design.append(problem, evaluate(problem, x, u));
  }

  ModelState state = build_models(problem, design, crn, config.gp_restarts);
  history.incumbents.push_back(incumbent_record(problem, state));

  for (int t = 1; t <= config.max_iterations; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const StepChoice choice = select_x(problem, state, t);
    auto [u_unit, criterion] = select_u(problem, state, choice.x_unit, t);

    const Vec x = problem.denormalize_x(choice.x_unit);
    Vec u = problem.denormalize_u(u_unit);
    std::string status = choice.solver_status;
    if (design.contains(problem, x, u)) {
      // Re-observing a known point carries no information; take the first
      // unobserved u on a Sobol probe instead.
      for (const Vec& probe : sobol_sequence(m, 128, 1 + t)) {
        const Vec alt = problem.denormalize_u(probe);
        if (!design.contains(problem, x, alt)) {
          u = alt;
          break;
        }
      }
      status += "+duplicate_u";
    }

    IterationRecord record;
    record.t = t;
    record.x_targ = x;
    record.u_next = u;
    record.evaluation = evaluate(problem, x, u);
    record.z_min_feas = state.incumbent.z_min_feas;
    record.x_at_incumbent = problem.denormalize_x(state.incumbent.x);
    record.incumbent_feasible = state.incumbent.feasible;
    record.efi_value = choice.acquisition_value;
    record.criterion_value = criterion;
    record.solver_status = status;
    design.append(problem, record.evaluation);

    state = build_models(problem, design, crn, config.gp_restarts, &state);
    history.incumbents.push_back(incumbent_record(problem, state));
    record.wall_time = std::chrono::steady_clock::now() - started;
    history.records.push_back(std::move(record));
  }
  history.final_design = std::move(design);
  return history;
}

StepChoice select_x_by_efi(const ProblemSpec& problem, const ModelState& state, const RunConfig& config, int t) {
  const int d = problem.dim_x();
  const AcquisitionContext& ctx = *state.acquisition;
  const auto report = maximize_unconstrained([&](const Vec& x) { return efi(ctx, x); }, BoxDomain::unit(d),
                                             config.budgets.evaluations_per_dim * d,
                                             config.budgets.acquisition_starts,
                                             derive_seed(config.seed, kAcquisitionStream, static_cast<std::uint64_t>(t)));
  return {report.best_point, report.best_value, to_string(report.status)};
}

StepChoice select_x_by_constrained_ei(const ProblemSpec& problem, const ModelState& state, const RunConfig& config,
                                      int t) {
  const int d = problem.dim_x();
  const AcquisitionContext& ctx = *state.acquisition;
  std::vector<ScalarFunction> quantiles;
  for (int i = 0; i < ctx.num_constraints(); ++i)
    quantiles.emplace_back([&ctx, i](const Vec& x) { return empirical_quantile_constraint(ctx, x, i); });
  const auto report = maximize_with_constraints(
      [&](const Vec& x) { return expected_improvement_z(ctx, x); }, quantiles, BoxDomain::unit(d),
      config.budgets.evaluations_per_dim * d,
      derive_seed(config.seed, kAcquisitionStream, static_cast<std::uint64_t>(t)));
  return {report.best_point, report.best_value, to_string(report.status)};
}

std::pair<Vec, double> select_u_by_deviation_number(const ProblemSpec& problem, const ModelState& state,
                                                    const Vec& x_unit, const RunConfig& config, int t) {
  const int m = problem.dim_u();
  const AcquisitionContext& ctx = *state.acquisition;
  const auto report = maximize_unconstrained(
      [&](const Vec& u) { return -std::min(deviation_number(ctx, x_unit, u), kDeviationCap); }, BoxDomain::unit(m),
      config.budgets.evaluations_per_dim * m, config.budgets.sampling_starts,
      derive_seed(config.seed, kSamplingStream, static_cast<std::uint64_t>(t)));
  return {report.best_point, -report.best_value};
}

namespace {

std::pair<Vec, double> select_u_by_sampling_criterion(const ProblemSpec& problem, const ModelState& state,
                                                      const Vec& x_unit, const RunConfig& config, int t) {
  const SamplingContext s(*state.acquisition, x_unit);
  USelectionOptions options;
  options.K = config.K;
  options.budget = config.budgets.evaluations_per_dim * problem.dim_u();
  options.starts = config.budgets.sampling_starts;
  options.seed = derive_seed(config.seed, kSamplingStream, static_cast<std::uint64_t>(t));
  const Vec u = select_next_u(s, options);
  double value = 0.0;
  try {
    value = sampling_criterion(s, s.candidate(u), config.K);
  } catch (const DegeneratePointError&) {
    value = 0.0;
  }
  return {u, value};
}

}  // namespace

RunHistory run_efisur(const ProblemSpec& problem, const RunConfig& config) {
  return run_loop(
      problem, config,
      [&](const ProblemSpec& p, const ModelState& s, int t) { return select_x_by_efi(p, s, config, t); },
      [&](const ProblemSpec& p, const ModelState& s, const Vec& x, int t) {
        return select_u_by_sampling_criterion(p, s, x, config, t);
      });
}

RunHistory run_efirand(const ProblemSpec& problem, const RunConfig& config) {
  std::mt19937_64 rng(derive_seed(config.seed, kRandomUStream));
  return run_loop(
      problem, config,
      [&](const ProblemSpec& p, const ModelState& s, int t) { return select_x_by_efi(p, s, config, t); },
      [&](const ProblemSpec& p, const ModelState&, const Vec&, int) {
        return std::pair<Vec, double>{p.normalize_u(p.dist_u().sample(rng)), 0.0};
      });
}

RunHistory run_ceidevnum(const ProblemSpec& problem, const RunConfig& config) {
  return run_loop(
      problem, config,
      [&](const ProblemSpec& p, const ModelState& s, int t) { return select_x_by_constrained_ei(p, s, config, t); },
      [&](const ProblemSpec& p, const ModelState& s, const Vec& x, int t) {
        return select_u_by_deviation_number(p, s, x, config, t);
      });
}

RunHistory run(const ProblemSpec& problem, const RunConfig& config) {
  switch (config.algorithm) {
    case Algorithm::efisur: return run_efisur(problem, config);
    case Algorithm::efirand: return run_efirand(problem, config);
    case Algorithm::ceidevnum: return run_ceidevnum(problem, config);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace ccbo
