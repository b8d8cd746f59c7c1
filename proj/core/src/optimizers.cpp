#include "ccbo/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "ccbo/errors.hpp"
#include "ccbo/quasirandom.hpp"
#include "linear_program.hpp"

namespace ccbo {

BoxDomain::BoxDomain(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw PreconditionError("box bounds must be nonempty and of equal size");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i])) throw PreconditionError("box requires lower < upper");
}

BoxDomain BoxDomain::unit(int dim) { return BoxDomain(Vec::Zero(dim), Vec::Ones(dim)); }

bool BoxDomain::contains(const Vec& p) const {
  return p.size() == lower.size() && (p.array() >= lower.array()).all() &&
         (p.array() <= upper.array()).all();
}

Vec BoxDomain::clamp(const Vec& p) const { return p.cwiseMax(lower).cwiseMin(upper); }

Vec BoxDomain::from_unit(const Vec& p) const {
  return clamp(lower + p.cwiseProduct(upper - lower));
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::budget_exhausted: return "budget_exhausted";
    case SolveStatus::fallback: return "fallback";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSkipRange = 4096;

Vec clamp01(const Vec& p) { return p.cwiseMax(0.0).cwiseMin(1.0); }

void check_budget(const BoxDomain& domain, int budget) {
  if (budget < domain.dim() + 2)
    throw PreconditionError(fmt::format("solver budget {} below dimension + 2 = {}", budget, domain.dim() + 2));
}

std::vector<Vec> probe_points(int dim, int count, std::uint64_t seed) {
  return sobol_sequence(dim, count, 1 + static_cast<int>(seed % kSkipRange));
}

// Objective in unit coordinates with a shared evaluation budget and a record
// of the best finite value seen so far.
class CountedObjective {
 public:
  CountedObjective(const ScalarFunction& f, const BoxDomain& domain, int budget)
      : f_(f), domain_(domain), budget_(budget) {}

  double operator()(const Vec& unit) {
    ++used_;
    const double value = f_(domain_.from_unit(unit));
    if (std::isfinite(value) && value > best_value_) {
      best_value_ = value;
      best_ = unit;
      best_start_ = start_;
    }
    return value;
  }

  int left() const { return budget_ - used_; }
  int used() const { return used_; }
  void begin_start(int id, const Vec& point, double value) {
    start_ = id;
    if (value == best_value_ && point == best_) best_start_ = id;
  }
  bool found() const { return std::isfinite(best_value_); }
  const Vec& best() const { return best_; }
  double best_value() const { return best_value_; }
  int best_start() const { return best_start_; }

 private:
  const ScalarFunction& f_;
  const BoxDomain& domain_;
  int budget_;
  int used_ = 0;
  int start_ = -1;
  int best_start_ = -1;
  Vec best_;
  double best_value_ = -kInf;
};

enum class LocalEnd { converged, budget, abandoned };

// Bounded Nelder-Mead minimizing -f in unit coordinates; every trial point is
// projected onto the cube.
LocalEnd nelder_mead(CountedObjective& eval, const Vec& x0, double f0, int allowance) {
  const int d = static_cast<int>(x0.size());
  const int stop_at = eval.used() + allowance;
  constexpr double kStep = 0.1;

  std::vector<Vec> x{x0};
  std::vector<double> h{-f0};
  auto take = [&](const Vec& p, double& out) {
    if (eval.used() >= stop_at) return LocalEnd::budget;
    out = -eval(p);
    return std::isfinite(out) ? LocalEnd::converged : LocalEnd::abandoned;
  };

  for (int i = 0; i < d; ++i) {
    Vec p = x0;
    p[i] += p[i] + kStep <= 1.0 ? kStep : -kStep;
    double value = 0.0;
    if (auto end = take(p, value); end != LocalEnd::converged) return end;
    x.push_back(std::move(p));
    h.push_back(value);
  }

  std::vector<int> order(static_cast<std::size_t>(d + 1));
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return h[a] < h[b]; });
    {
      std::vector<Vec> xs;
      std::vector<double> hs;
      for (int k : order) {
        xs.push_back(x[k]);
        hs.push_back(h[k]);
      }
      x.swap(xs);
      h.swap(hs);
    }

    double diameter = 0.0;
    for (int i = 1; i <= d; ++i) diameter = std::max(diameter, (x[i] - x[0]).lpNorm<Eigen::Infinity>());
    if (h[d] - h[0] <= 1e-10 * std::abs(h[0]) + 1e-14 || diameter <= 1e-9) return LocalEnd::converged;

    Vec centroid = Vec::Zero(d);
    for (int i = 0; i < d; ++i) centroid += x[i];
    centroid /= d;

    const Vec xr = clamp01(centroid + (centroid - x[d]));
    double hr = 0.0;
    if (auto end = take(xr, hr); end != LocalEnd::converged) return end;

    if (hr < h[0]) {
      const Vec xe = clamp01(centroid + 2.0 * (centroid - x[d]));
      double he = 0.0;
      if (auto end = take(xe, he); end != LocalEnd::converged) return end;
      if (he < hr) {
        x[d] = xe;
        h[d] = he;
      } else {
        x[d] = xr;
        h[d] = hr;
      }
      continue;
    }
    if (hr < h[d - 1]) {
      x[d] = xr;
      h[d] = hr;
      continue;
    }

    const bool outside = hr < h[d];
    const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (x[d] - centroid));
    double hc = 0.0;
    if (auto end = take(xc, hc); end != LocalEnd::converged) return end;
    if (outside ? hc <= hr : hc < h[d]) {
      x[d] = xc;
      h[d] = hc;
      continue;
    }

    for (int i = 1; i <= d; ++i) {
      x[i] = x[0] + 0.5 * (x[i] - x[0]);
      if (auto end = take(x[i], h[i]); end != LocalEnd::converged) return end;
    }
  }
}

}  // namespace

SolveReport maximize_unconstrained(const ScalarFunction& objective, const BoxDomain& domain,
                                   int budget, int starts, std::uint64_t seed) {
  check_budget(domain, budget);
  starts = std::max(starts, 1);
  const int d = domain.dim();
  CountedObjective eval(objective, domain, budget);

  const int probe_count = std::min(budget, std::max(starts, 10 * d));
  const auto probes = probe_points(d, probe_count, seed);
  std::vector<std::pair<double, int>> ranked;
  for (int k = 0; k < probe_count; ++k) {
    const double value = eval(probes[k]);
    if (std::isfinite(value)) ranked.emplace_back(value, k);
  }
  if (ranked.empty()) throw SolverError("objective is non-finite at every probe point");
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const int runs = std::min<int>(starts, static_cast<int>(ranked.size()));
  std::vector<LocalEnd> ends(static_cast<std::size_t>(runs), LocalEnd::budget);
  for (int s = 0; s < runs; ++s) {
    const int allowance = eval.left() / (runs - s);
    if (allowance < d + 1) continue;
    const Vec& start = probes[ranked[s].second];
    eval.begin_start(s, start, ranked[s].first);
    ends[s] = nelder_mead(eval, start, ranked[s].first, allowance);
  }

  SolveReport report;
  report.best_point = domain.from_unit(eval.best());
  report.best_value = eval.best_value();
  report.evaluations_used = eval.used();
  const int owner = eval.best_start();
  report.status = owner >= 0 && ends[owner] == LocalEnd::converged ? SolveStatus::converged
                                                                    : SolveStatus::budget_exhausted;
  return report;
}

namespace {

constexpr double kFeasibilityTol = 1e-8;
constexpr double kInitialRadius = 0.1;
constexpr double kFinalRadius = 1e-5;
constexpr int kConstrainedStarts = 5;

struct Trial {
  Vec unit;
  double f = -kInf;
  double violation = kInf;
  Vec c;
};

bool better(const Trial& a, const Trial& b) {
  const bool fa = a.violation <= kFeasibilityTol;
  const bool fb = b.violation <= kFeasibilityTol;
  if (fa != fb) return fa;
  if (fa) return a.f > b.f;
  if (a.violation != b.violation) return a.violation < b.violation;
  return a.f > b.f;
}

class ConstrainedEval {
 public:
  ConstrainedEval(const ScalarFunction& f, std::span<const ScalarFunction> cons, const BoxDomain& domain,
                  int budget)
      : f_(f), cons_(cons), domain_(domain), budget_(budget) {}

  Trial operator()(const Vec& unit) {
    ++used_;
    Trial t;
    t.unit = unit;
    const Vec p = domain_.from_unit(unit);
    t.f = f_(p);
    t.c.resize(static_cast<Eigen::Index>(cons_.size()));
    double violation = 0.0;
    bool finite = std::isfinite(t.f);
    for (std::size_t i = 0; i < cons_.size(); ++i) {
      const double value = cons_[i](p);
      t.c[static_cast<Eigen::Index>(i)] = value;
      finite = finite && std::isfinite(value);
      violation = std::max(violation, value);
    }
    if (!finite) {
      t.f = -kInf;
      t.violation = kInf;
    } else {
      t.violation = violation;
    }
    if (std::isfinite(t.f) && (!best_ || better(t, *best_))) {
      best_ = t;
      best_start_ = start_;
    }
    return t;
  }

  int left() const { return budget_ - used_; }
  int used() const { return used_; }
  void begin_start(int id, const Trial& from) {
    start_ = id;
    if (best_ && from.unit == best_->unit) best_start_ = id;
  }
  const std::optional<Trial>& best() const { return best_; }
  int best_start() const { return best_start_; }

 private:
  const ScalarFunction& f_;
  std::span<const ScalarFunction> cons_;
  const BoxDomain& domain_;
  int budget_;
  int used_ = 0;
  int start_ = -1;
  int best_start_ = -1;
  std::optional<Trial> best_;
};

// Trust-region step from linear models: maximize g.s subject to the
// linearized constraints and |s_i| <= rho inside the unit cube. Falls back to
// minimizing the linearized violation first when the constraints cannot all
// be met within the region.
Vec linear_step(const Vec& center, double rho, const Vec& grad, const Mat& jac, const Vec& c) {
  const int d = static_cast<int>(center.size());
  const int l = static_cast<int>(c.size());
  const Vec lo = (-center).cwiseMax(-rho);
  const Vec hi = (Vec::Ones(d) - center).cwiseMin(rho);
  const Vec span = hi - lo;

  // Substituting s = lo + y with y >= 0.
  Mat A(l + d, d);
  Vec b(l + d);
  A.topRows(l) = jac;
  b.head(l) = -c - jac * lo;
  A.bottomRows(d) = Mat::Identity(d, d);
  b.tail(d) = span;

  auto solved = detail::solve_lp(grad, A, b);
  if (solved.status != detail::LpStatus::optimal) {
    Mat A1 = Mat::Zero(l + d, d + 1);
    A1.topLeftCorner(l, d) = jac;
    A1.topRightCorner(l, 1).setConstant(-1.0);
    A1.bottomLeftCorner(d, d) = Mat::Identity(d, d);
    Vec cost = Vec::Zero(d + 1);
    cost[d] = -1.0;
    const auto phase1 = detail::solve_lp(cost, A1, b);
    if (phase1.status != detail::LpStatus::optimal) return Vec::Zero(d);
    const double t_star = phase1.x[d];
    Vec relaxed = b;
    relaxed.head(l).array() += t_star * (1.0 + 1e-9) + 1e-12;
    solved = detail::solve_lp(grad, A, relaxed);
    if (solved.status != detail::LpStatus::optimal) return lo + phase1.x.head(d);
  }
  return lo + solved.x;
}

enum class TrEnd { converged, budget, abandoned };

// Exact-penalty merit used to move the trust-region center; steps along a
// curved boundary are slightly infeasible, so feasibility-first ranking
// alone would stall there.
double merit(const Trial& t, double mu) { return t.f - mu * std::max(0.0, t.violation); }

TrEnd trust_region(ConstrainedEval& eval, Trial center) {
  const int d = static_cast<int>(center.unit.size());
  const int l = static_cast<int>(center.c.size());
  double rho = kInitialRadius;
  double mu = 0.0;
  while (rho >= kFinalRadius) {
    if (eval.left() < d + 1) return TrEnd::budget;

    Vec grad(d);
    Mat jac(l, d);
    std::vector<Trial> trials;
    for (int i = 0; i < d; ++i) {
      Vec p = center.unit;
      const double h = p[i] + rho <= 1.0 ? rho : -rho;
      p[i] += h;
      Trial t = eval(p);
      if (!std::isfinite(t.f)) return TrEnd::abandoned;
      grad[i] = (t.f - center.f) / h;
      jac.col(i) = (t.c - center.c) / h;
      trials.push_back(std::move(t));
    }
    // Penalty at least twice the objective/constraint slope ratio.
    for (int i = 0; i < l; ++i) {
      const double slope = jac.row(i).norm();
      if (slope > 0.0) mu = std::max(mu, 2.0 * grad.norm() / slope);
    }

    const Vec s = linear_step(center.unit, rho, grad, jac, center.c);
    if (s.lpNorm<Eigen::Infinity>() > 1e-12) {
      Trial t = eval(clamp01(center.unit + s));
      if (!std::isfinite(t.f)) return TrEnd::abandoned;
      trials.push_back(std::move(t));
    }

    const Trial* next = &center;
    for (const Trial& t : trials) {
      const double gain = merit(t, mu) - merit(*next, mu);
      if (gain > 0.0 || (gain == 0.0 && better(t, *next))) next = &t;
    }
    if (next != &center) {
      center = *next;
    } else {
      rho *= 0.5;
    }
  }
  return TrEnd::converged;
}

}  // namespace

SolveReport maximize_with_constraints(const ScalarFunction& objective,
                                      std::span<const ScalarFunction> constraints,
                                      const BoxDomain& domain, int budget, std::uint64_t seed) {
  check_budget(domain, budget);
  const int d = domain.dim();
  ConstrainedEval eval(objective, constraints, domain, budget);

  const int probe_count = std::min(budget, std::max(d + 2, 10 * d));
  std::vector<Trial> probes;
  for (const Vec& p : probe_points(d, probe_count, seed)) {
    Trial t = eval(p);
    if (std::isfinite(t.f)) probes.push_back(std::move(t));
  }
  if (probes.empty()) throw SolverError("objective or constraints non-finite at every probe point");
  std::stable_sort(probes.begin(), probes.end(), better);

  std::vector<TrEnd> ends;
  std::vector<Vec> visited;
  for (const Trial& start : probes) {
    if (static_cast<int>(ends.size()) == kConstrainedStarts || eval.left() < d + 1) break;
    const bool near = std::any_of(visited.begin(), visited.end(), [&](const Vec& v) {
      return (v - start.unit).lpNorm<Eigen::Infinity>() < kInitialRadius;
    });
    if (near) continue;
    visited.push_back(start.unit);
    eval.begin_start(static_cast<int>(ends.size()), start);
    ends.push_back(trust_region(eval, start));
  }

  const Trial& best = *eval.best();
  SolveReport report;
  report.best_point = domain.from_unit(best.unit);
  report.best_value = best.f;
  report.evaluations_used = eval.used();
  report.max_violation = std::max(0.0, best.violation);
  const int owner = eval.best_start();
  if (best.violation > kFeasibilityTol) {
    report.status = SolveStatus::fallback;
  } else if (owner >= 0 && ends[owner] == TrEnd::converged) {
    report.status = SolveStatus::converged;
  } else {
    report.status = SolveStatus::budget_exhausted;
  }
  return report;
}

}  // namespace ccbo
