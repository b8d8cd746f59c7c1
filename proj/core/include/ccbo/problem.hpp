#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ccbo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
  double width() const { return upper - lower; }
};

/// Distribution of the uncertain parameters U.
///
/// Implementations must have a bounded support: all internal computation is
/// carried out on coordinates normalized to [0,1] by the support bounds. The
/// inverse CDF maps unit-cube points onto the support and is what makes the
/// common-random-number set a deterministic function of the seed.
class UncertaintyDistribution {
 public:
  virtual ~UncertaintyDistribution() = default;

  virtual int dim() const = 0;
  virtual std::vector<Interval> support() const = 0;
  virtual Vec sample(std::mt19937_64& rng) const = 0;
  virtual double density(const Vec& u) const = 0;
  virtual Vec inverse_cdf(const Vec& p) const = 0;
  virtual Vec mean() const = 0;
  virtual std::string describe() const = 0;

  bool in_support(const Vec& u, double rel_tol = 1e-12) const;
};

/// Independent uniform coordinates, U_i ~ Uniform[lower_i, upper_i].
class IndependentUniform final : public UncertaintyDistribution {
 public:
  explicit IndependentUniform(std::vector<Interval> bounds);

  int dim() const override { return static_cast<int>(bounds_.size()); }
  std::vector<Interval> support() const override { return bounds_; }
  Vec sample(std::mt19937_64& rng) const override;
  double density(const Vec& u) const override;
  Vec inverse_cdf(const Vec& p) const override;
  Vec mean() const override;
  std::string describe() const override;

 private:
  std::vector<Interval> bounds_;
};

/// Pure function of a design vector x and an uncertainty vector u.
using Evaluator = std::function<double(const Vec& x, const Vec& u)>;

/// Chance-constrained problem: minimize E_U[f(x,U)] subject to
/// P(g_i(x,U) <= 0 for all i) >= 1 - alpha.
class ProblemSpec {
 public:
  ProblemSpec(std::string name, std::vector<Interval> bounds_x,
              std::shared_ptr<const UncertaintyDistribution> dist_u,
              double alpha, Evaluator objective,
              std::vector<Evaluator> constraints);

  const std::string& name() const { return name_; }
  int dim_x() const { return static_cast<int>(bounds_x_.size()); }
  int dim_u() const { return dist_u_->dim(); }
  int dim_joint() const { return dim_x() + dim_u(); }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  double alpha() const { return alpha_; }
  const std::vector<Interval>& bounds_x() const { return bounds_x_; }
  const UncertaintyDistribution& dist_u() const { return *dist_u_; }
  std::shared_ptr<const UncertaintyDistribution> dist_u_ptr() const { return dist_u_; }
  const Evaluator& objective() const { return objective_; }
  const Evaluator& constraint(int i) const { return constraints_.at(i); }

  /// Optional known solution used to measure convergence.
  const std::optional<Vec>& reference_x() const { return reference_x_; }
  void set_reference_x(Vec x) { reference_x_ = std::move(x); }

  bool x_in_bounds(const Vec& x, double rel_tol = 1e-12) const;

  Vec normalize_x(const Vec& x) const;
  Vec denormalize_x(const Vec& x_unit) const;
  Vec normalize_u(const Vec& u) const;
  Vec denormalize_u(const Vec& u_unit) const;
  // (x, u) raw -> stacked normalized joint vector of size d + m.
  Vec to_joint(const Vec& x, const Vec& u) const;

 private:
  std::string name_;
  std::vector<Interval> bounds_x_;
  std::vector<Interval> support_u_;
  std::shared_ptr<const UncertaintyDistribution> dist_u_;
  double alpha_;
  Evaluator objective_;
  std::vector<Evaluator> constraints_;
  std::optional<Vec> reference_x_;
};

struct Evaluation {
  Vec x;
  Vec u;
  double f = 0.0;
  Vec g;
};

/// Evaluated points D^(t) with their objective and constraint observations.
class JointDesign {
 public:
  static constexpr double kDuplicateTolerance = 1e-9;

  JointDesign() = default;
  // Rebuilds a design from stored evaluations (e.g. a history file) without
  // re-checking for duplicates.
  static JointDesign restore(std::vector<Evaluation> evaluations);

  const std::vector<Evaluation>& evaluations() const { return evaluations_; }
  std::size_t size() const { return evaluations_.size(); }
  bool empty() const { return evaluations_.empty(); }
  const Evaluation& operator[](std::size_t i) const { return evaluations_[i]; }

  // True when (x, u) lies within the duplicate tolerance of a stored point
  // (distance measured in normalized joint coordinates).
  bool contains(const ProblemSpec& problem, const Vec& x, const Vec& u) const;

  // Throws PreconditionError on a duplicate joint point.
  void append(const ProblemSpec& problem, Evaluation evaluation);

  // Normalized joint inputs, one row per evaluation.
  Mat joint_inputs(const ProblemSpec& problem) const;
  Vec objective_values() const;
  Vec constraint_values(int i) const;
  // Distinct design vectors (raw coordinates) in insertion order.
  std::vector<Vec> distinct_designs() const;

 private:
  std::vector<Evaluation> evaluations_;
};

/// Evaluates f and every g_i at (x, u). Throws DomainError outside S_X x S_U.
Evaluation evaluate(const ProblemSpec& problem, const Vec& x, const Vec& u);

/// Two design variables, two uniform uncertain parameters, one constraint.
ProblemSpec analytical_benchmark();

/// Registered problems by name ("analytic-2x2"). Throws ConfigError.
ProblemSpec problem_by_name(std::string_view name);
std::vector<std::string> registered_problem_names();

struct ReferenceSolution {
  Vec x;
  double mean_objective = 0.0;
  double feasibility = 0.0;
};

/// Brute-force oracle: estimates E_U[f] and P(all g_i <= 0) with mc_size
/// Sobol-mapped samples on a grid_res x ... x grid_res lattice spanning the
/// design bounds (end points included), then optionally zooms
/// refine_levels times onto a +/- one-cell box around the incumbent.
/// Returns std::nullopt when no lattice point is feasible.
std::optional<ReferenceSolution> reference_solution(const ProblemSpec& problem,
                                                    int grid_res, int mc_size,
                                                    int refine_levels = 0);

}  // namespace ccbo
