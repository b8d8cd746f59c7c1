#include "ccbo/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ccbo/errors.hpp"
#include "ccbo/quasirandom.hpp"

namespace ccbo {

namespace {

bool within(const Vec& v, const std::vector<Interval>& bounds, double rel_tol) {
  if (v.size() != static_cast<Eigen::Index>(bounds.size())) return false;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const double slack = rel_tol * bounds[i].width();
    const double value = v[static_cast<Eigen::Index>(i)];
    if (!(value >= bounds[i].lower - slack && value <= bounds[i].upper + slack)) return false;
  }
  return true;
}

Vec to_unit(const Vec& v, const std::vector<Interval>& bounds) {
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& b = bounds[static_cast<std::size_t>(i)];
    out[i] = (v[i] - b.lower) / b.width();
  }
  return out;
}

Vec from_unit(const Vec& v, const std::vector<Interval>& bounds) {
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& b = bounds[static_cast<std::size_t>(i)];
    out[i] = b.lower + v[i] * b.width();
  }
  return out;
}

void check_bounds(const std::vector<Interval>& bounds, const char* what) {
  if (bounds.empty()) throw PreconditionError(fmt::format("{} must have at least one coordinate", what));
  for (const auto& b : bounds) {
    if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || !(b.lower < b.upper))
      throw PreconditionError(fmt::format("{} requires finite lower < upper", what));
  }
}

}  // namespace

bool UncertaintyDistribution::in_support(const Vec& u, double rel_tol) const {
  return within(u, support(), rel_tol);
}

IndependentUniform::IndependentUniform(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
  check_bounds(bounds_, "uniform support");
}

Vec IndependentUniform::sample(std::mt19937_64& rng) const {
  Vec p(dim());
  for (int i = 0; i < dim(); ++i) p[i] = unit_uniform(rng);
  return inverse_cdf(p);
}

double IndependentUniform::density(const Vec& u) const {
  if (!within(u, bounds_, 0.0)) return 0.0;
  double volume = 1.0;
  for (const auto& b : bounds_) volume *= b.width();
  return 1.0 / volume;
}

Vec IndependentUniform::inverse_cdf(const Vec& p) const { return from_unit(p, bounds_); }

Vec IndependentUniform::mean() const {
  Vec m(dim());
  for (int i = 0; i < dim(); ++i) m[i] = 0.5 * (bounds_[i].lower + bounds_[i].upper);
  return m;
}

std::string IndependentUniform::describe() const {
  std::string out = "uniform(";
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    if (i) out += " x ";
    out += fmt::format("[{}, {}]", bounds_[i].lower, bounds_[i].upper);
  }
  return out + ")";
}

ProblemSpec::ProblemSpec(std::string name, std::vector<Interval> bounds_x,
                         std::shared_ptr<const UncertaintyDistribution> dist_u, double alpha,
                         Evaluator objective, std::vector<Evaluator> constraints)
    : name_(std::move(name)),
      bounds_x_(std::move(bounds_x)),
      dist_u_(std::move(dist_u)),
      alpha_(alpha),
      objective_(std::move(objective)),
      constraints_(std::move(constraints)) {
  check_bounds(bounds_x_, "design bounds");
  if (!dist_u_ || dist_u_->dim() < 1) throw PreconditionError("problem needs an uncertainty distribution");
  support_u_ = dist_u_->support();
  check_bounds(support_u_, "uncertainty support");
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (!objective_) throw PreconditionError("problem needs an objective");
  if (constraints_.empty()) throw PreconditionError("problem needs at least one constraint");
}

bool ProblemSpec::x_in_bounds(const Vec& x, double rel_tol) const {
  return within(x, bounds_x_, rel_tol);
}

Vec ProblemSpec::normalize_x(const Vec& x) const { return to_unit(x, bounds_x_); }
Vec ProblemSpec::denormalize_x(const Vec& x_unit) const { return from_unit(x_unit, bounds_x_); }
Vec ProblemSpec::normalize_u(const Vec& u) const { return to_unit(u, support_u_); }
Vec ProblemSpec::denormalize_u(const Vec& u_unit) const { return from_unit(u_unit, support_u_); }

Vec ProblemSpec::to_joint(const Vec& x, const Vec& u) const {
  Vec joint(dim_joint());
  joint << normalize_x(x), normalize_u(u);
  return joint;
}

JointDesign JointDesign::restore(std::vector<Evaluation> evaluations) {
  JointDesign design;
  design.evaluations_ = std::move(evaluations);
  return design;
}

bool JointDesign::contains(const ProblemSpec& problem, const Vec& x, const Vec& u) const {
  const Vec p = problem.to_joint(x, u);
  return std::any_of(evaluations_.begin(), evaluations_.end(), [&](const Evaluation& e) {
    return (problem.to_joint(e.x, e.u) - p).norm() <= kDuplicateTolerance;
  });
}

void JointDesign::append(const ProblemSpec& problem, Evaluation evaluation) {
  if (contains(problem, evaluation.x, evaluation.u))
    throw PreconditionError("duplicate joint point appended to the design");
  evaluations_.push_back(std::move(evaluation));
}

Mat JointDesign::joint_inputs(const ProblemSpec& problem) const {
  Mat out(static_cast<Eigen::Index>(size()), problem.dim_joint());
  for (std::size_t k = 0; k < size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = problem.to_joint(evaluations_[k].x, evaluations_[k].u).transpose();
  return out;
}

Vec JointDesign::objective_values() const {
  Vec out(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) out[static_cast<Eigen::Index>(k)] = evaluations_[k].f;
  return out;
}

Vec JointDesign::constraint_values(int i) const {
  Vec out(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) out[static_cast<Eigen::Index>(k)] = evaluations_[k].g[i];
  return out;
}

std::vector<Vec> JointDesign::distinct_designs() const {
  std::vector<Vec> out;
  for (const auto& e : evaluations_) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Vec& x) { return (x - e.x).norm() == 0.0; });
    if (!seen) out.push_back(e.x);
  }
  return out;
}

Evaluation evaluate(const ProblemSpec& problem, const Vec& x, const Vec& u) {
  if (!problem.x_in_bounds(x)) throw DomainError("design point outside the design bounds");
  if (!problem.dist_u().in_support(u)) throw DomainError("uncertainty point outside its support");
  Evaluation e{x, u, problem.objective()(x, u), Vec(problem.num_constraints())};
  for (int i = 0; i < problem.num_constraints(); ++i) e.g[i] = problem.constraint(i)(x, u);
  return e;
}

ProblemSpec analytical_benchmark() {
  auto f = [](const Vec& x, const Vec& u) {
    return 5.0 * (x[0] * x[0] + x[1] * x[1]) - (u[0] * u[0] + u[1] * u[1]) +
           x[0] * (u[1] - u[0] + 5.0) + x[1] * (u[0] - u[1] + 3.0);
  };
  auto g = [](const Vec& x, const Vec& u) {
    return -x[0] * x[0] + 5.0 * x[1] - u[0] + u[1] * u[1] - 1.0;
  };
  auto dist = std::make_shared<IndependentUniform>(std::vector<Interval>{{-5.0, 5.0}, {-5.0, 5.0}});
  ProblemSpec problem("analytic-2x2", {{-5.0, 5.0}, {-5.0, 5.0}}, std::move(dist), 0.05, f, {g});
  Vec reference(2);
  reference << -3.62069, -1.896552;
  problem.set_reference_x(reference);
  return problem;
}

ProblemSpec problem_by_name(std::string_view name) {
  if (name == "analytic-2x2") return analytical_benchmark();
  throw ConfigError(fmt::format("unknown problem '{}'", name));
}

std::vector<std::string> registered_problem_names() { return {"analytic-2x2"}; }

namespace {

struct GridScan {
  std::optional<ReferenceSolution> best;
  std::vector<double> cell;  // lattice spacing per coordinate
};

// Exhaustive scan of a grid_res^d lattice over `box`.
GridScan scan_lattice(const ProblemSpec& problem, const std::vector<Interval>& box, int grid_res,
                      const std::vector<Vec>& u_samples) {
  const int d = problem.dim_x();
  GridScan scan;
  for (const auto& b : box) scan.cell.push_back(b.width() / (grid_res - 1));

  const double target = 1.0 - problem.alpha();
  std::vector<int> index(static_cast<std::size_t>(d), 0);
  Vec x(d);
  for (;;) {
    for (int i = 0; i < d; ++i) x[i] = box[i].lower + scan.cell[i] * index[i];

    double sum_f = 0.0;
    std::size_t feasible = 0;
    for (const Vec& u : u_samples) {
      sum_f += problem.objective()(x, u);
      bool ok = true;
      for (int c = 0; c < problem.num_constraints() && ok; ++c) ok = problem.constraint(c)(x, u) <= 0.0;
      feasible += ok ? 1 : 0;
    }
    const double n = static_cast<double>(u_samples.size());
    const double p = static_cast<double>(feasible) / n;
    const double mean_f = sum_f / n;
    if (p >= target && (!scan.best || mean_f < scan.best->mean_objective))
      scan.best = ReferenceSolution{x, mean_f, p};

    int k = 0;
    while (k < d && ++index[k] == grid_res) index[k++] = 0;
    if (k == d) break;
  }
  return scan;
}

}  // namespace

std::optional<ReferenceSolution> reference_solution(const ProblemSpec& problem, int grid_res,
                                                    int mc_size, int refine_levels) {
  if (grid_res < 2) throw PreconditionError("reference grid needs at least 2 points per axis");
  if (mc_size < 1) throw PreconditionError("reference Monte Carlo size must be positive");

  std::vector<Vec> u_samples;
  u_samples.reserve(static_cast<std::size_t>(mc_size));
  for (const Vec& p : sobol_sequence(problem.dim_u(), mc_size))
    u_samples.push_back(problem.dist_u().inverse_cdf(p));

  std::vector<Interval> box = problem.bounds_x();
  GridScan scan = scan_lattice(problem, box, grid_res, u_samples);
  for (int level = 0; level < refine_levels && scan.best; ++level) {
    const std::vector<double> half = scan.cell;
    auto around = [&](const Vec& c) {
      std::vector<Interval> zoom;
      for (std::size_t i = 0; i < half.size(); ++i) {
        const auto& outer = problem.bounds_x()[i];
        const auto k = static_cast<Eigen::Index>(i);
        zoom.push_back({std::max(outer.lower, c[k] - half[i]), std::min(outer.upper, c[k] + half[i])});
      }
      return zoom;
    };
    // An optimum on an inner edge of the zoom box means the box missed it:
    // slide the box (same size) before shrinking further.
    // "On" means within one lattice step: the feasible boundary rarely
    // crosses the box exactly on a lattice row.
    auto on_inner_edge = [&](const Vec& x, const std::vector<Interval>& zoom, const std::vector<double>& step) {
      for (std::size_t i = 0; i < zoom.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const auto& outer = problem.bounds_x()[i];
        const double tol = 1.01 * step[i];
        if ((x[k] <= zoom[i].lower + tol && zoom[i].lower > outer.lower) ||
            (x[k] >= zoom[i].upper - tol && zoom[i].upper < outer.upper))
          return true;
      }
      return false;
    };

    std::vector<Interval> zoom = around(scan.best->x);
    GridScan finer = scan_lattice(problem, zoom, grid_res, u_samples);
    for (int slide = 0; slide < 100 && finer.best && on_inner_edge(finer.best->x, zoom, finer.cell); ++slide) {
      if (finer.best->mean_objective >= scan.best->mean_objective) break;
      std::vector<Interval> moved = around(finer.best->x);
      GridScan next = scan_lattice(problem, moved, grid_res, u_samples);
      if (!next.best || next.best->mean_objective >= finer.best->mean_objective) break;
      zoom = std::move(moved);
      finer = std::move(next);
    }
    if (!finer.best) break;
    // Keep whichever is better so refinement never regresses.
    if (finer.best->mean_objective <= scan.best->mean_objective) {
      scan = std::move(finer);
    } else {
      scan.cell = finer.cell;
    }
    box = std::move(zoom);
  }
  return scan.best;
}

}  // namespace ccbo
