#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ccbo/problem.hpp"

namespace ccbo {

struct BoxDomain {
  Vec lower;
  Vec upper;

  BoxDomain(Vec lower, Vec upper);
  static BoxDomain unit(int dim);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& p) const;
  Vec clamp(const Vec& p) const;
  // Maps a unit-cube point onto the box.
  Vec from_unit(const Vec& p) const;
};

enum class SolveStatus { converged, budget_exhausted, fallback };

std::string to_string(SolveStatus status);

struct SolveReport {
  Vec best_point;
  double best_value = 0.0;
  int evaluations_used = 0;
  SolveStatus status = SolveStatus::converged;
  // max(0, max_i c_i(best_point)); zero for unconstrained solves.
  double max_violation = 0.0;
};

using ScalarFunction = std::function<double(const Vec&)>;

/// Multi-start Nelder-Mead maximization inside a box.
///
/// The budget is shared: Sobol probes are evaluated first (their count is
/// min(budget, max(starts, 10 * dim))), then the best `starts` probes seed
/// local simplex searches that split what is left. A start is abandoned as
/// soon as it meets a non-finite value. Deterministic for a given seed.
/// Throws SolverError when every probe is non-finite and PreconditionError
/// when budget < dim + 2.
SolveReport maximize_unconstrained(const ScalarFunction& objective,
                                   const BoxDomain& domain, int budget,
                                   int starts, std::uint64_t seed);

/// Derivative-free constrained maximization, c_i(p) <= 0 feasible.
///
/// Linear models of the objective and constraints are interpolated on a
/// simplex around the incumbent and the step solves a linear program inside
/// an infinity-norm trust region (first minimizing the linearized violation
/// when the linearized constraints are infeasible). Points are ranked
/// feasibility first. When no feasible point is found the least-violating
/// point is returned with status fallback.
SolveReport maximize_with_constraints(const ScalarFunction& objective,
                                      std::span<const ScalarFunction> constraints,
                                      const BoxDomain& domain, int budget,
                                      std::uint64_t seed);

}  // namespace ccbo
