#include "ccbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ccbo/errors.hpp"

namespace ccbo {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double expected_improvement(double m, double sd, double z_min) {
  const double gap = z_min - m;
  if (!(sd > 0.0)) return std::max(gap, 0.0);
  const double d = gap / sd;
  return std::max(0.0, gap * normal_cdf(d) + sd * normal_pdf(d));
}

double variance_of_improvement(double m, double sd, double z_min) {
  if (!(sd > 0.0)) return 0.0;
  const double gap = z_min - m;
  const double ei = expected_improvement(m, sd, z_min);
  return std::max(0.0, ei * (gap - ei) + sd * sd * normal_cdf(gap / sd));
}

AcquisitionContext::AcquisitionContext(std::shared_ptr<const ZProcess> z,
                                       std::vector<std::shared_ptr<const GpPosterior>> constraint_gps,
                                       std::shared_ptr<const CrnSet> crn, double alpha)
    : z_(std::move(z)), crn_(std::move(crn)), alpha_(alpha) {
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (constraint_gps.empty()) throw PreconditionError("acquisition needs at least one constraint model");
  if (crn_->num_blocks() < static_cast<int>(constraint_gps.size()))
    throw PreconditionError("CRN set holds fewer normal blocks than constraints");
  for (auto& gp : constraint_gps) constraint_slices_.emplace_back(std::move(gp), crn_->u_unit());
}

void AcquisitionContext::set_z_min_feas(double value) {
  if (!std::isfinite(value)) throw PreconditionError("z_min_feas must be finite");
  z_min_feas_ = value;
}

double prob_nonpositive(double m, double sd) {
  if (sd > 0.0) return normal_cdf(-m / sd);
  if (m < 0.0) return 1.0;
  if (m > 0.0) return 0.0;
  return 0.5;
}

namespace {

// N x M indicator counts: per trajectory, the number of u-points where every
// constraint realization is nonpositive.
Eigen::VectorXi feasible_counts(const AcquisitionContext& ctx, const Vec& x) {
  const int N = ctx.crn().N();
  const int M = ctx.crn().M();
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ok = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(N, M, true);
  for (int i = 0; i < ctx.num_constraints(); ++i) {
    const SliceModel& model = ctx.constraint_slices(i);
    const TrajectoryEnsemble ens = model.simulate(model.at(x), ctx.crn().normal_block(i));
    ok = ok && (ens.values.array() <= 0.0);
  }
  return ok.cast<int>().rowwise().sum();
}

}  // namespace

double prob_feasible_with_confidence(const AcquisitionContext& ctx, const Vec& x) {
  const Eigen::VectorXi counts = feasible_counts(ctx, x);
  const double needed = (1.0 - ctx.alpha()) * ctx.crn().M() - 1e-9;
  const auto hits = (counts.cast<double>().array() >= needed).count();
  return static_cast<double>(hits) / static_cast<double>(counts.size());
}

double feasibility_fraction(const AcquisitionContext& ctx, const Vec& x) {
  const Eigen::VectorXi counts = feasible_counts(ctx, x);
  return static_cast<double>(counts.sum()) / (static_cast<double>(counts.size()) * ctx.crn().M());
}

double averaged_feasibility(const AcquisitionContext& ctx, const Vec& x) {
  Vec p = Vec::Ones(ctx.crn().M());
  for (int i = 0; i < ctx.num_constraints(); ++i) {
    const auto slice = ctx.constraint_slices(i).at(x);
    for (Eigen::Index j = 0; j < p.size(); ++j) p[j] *= prob_nonpositive(slice.mean[j], std::sqrt(slice.variance[j]));
  }
  return p.mean();
}

double expected_c(const AcquisitionContext& ctx, const Vec& x) {
  return 1.0 - ctx.alpha() - averaged_feasibility(ctx, x);
}

Incumbent current_feasible_min(const AcquisitionContext& ctx, const std::vector<Vec>& candidate_xs) {
  if (candidate_xs.empty()) throw PreconditionError("incumbent search needs at least one candidate");
  std::optional<Incumbent> best;
  std::size_t most_feasible = 0;
  double best_feasibility = -1.0;
  for (std::size_t k = 0; k < candidate_xs.size(); ++k) {
    const Vec& x = candidate_xs[k];
    const double feasibility = averaged_feasibility(ctx, x);
    if (feasibility > best_feasibility) {
      best_feasibility = feasibility;
      most_feasible = k;
    }
    if (1.0 - ctx.alpha() - feasibility <= 0.0) {
      const double m = ctx.z().mean(x);
      if (!best || m < best->z_min_feas) best = Incumbent{m, x, true};
    }
  }
  if (best) return *best;
  const Vec& x = candidate_xs[most_feasible];
  return Incumbent{ctx.z().mean(x), x, false};
}

double expected_improvement_z(const AcquisitionContext& ctx, const Vec& x) {
  if (!ctx.z_min_feas()) throw PreconditionError("z_min_feas is not set");
  const auto slice = ctx.z().slices().at(x);
  return expected_improvement(ctx.z().mean(slice), std::sqrt(ctx.z().variance(slice)), *ctx.z_min_feas());
}

double efi(const AcquisitionContext& ctx, const Vec& x) {
  const double ei = expected_improvement_z(ctx, x);
  // The trajectory estimate is the expensive factor; skip it when EI vanishes.
  if (ei <= 0.0) return 0.0;
  return ei * prob_feasible_with_confidence(ctx, x);
}

int quantile_order_index(double alpha, int M) {
  const int index = static_cast<int>(std::ceil((1.0 - alpha) * M - 1e-9));
  return std::clamp(index, 1, M);
}

double empirical_quantile_constraint(const AcquisitionContext& ctx, const Vec& x, int i) {
  const SliceModel& model = ctx.constraint_slices(i);
  const GpPosterior& gp = model.gp();
  Vec means = Vec::Constant(model.M(), gp.trend());
  if (gp.size() > 0) means.noalias() += gp.cross(model.joint_points(x)).transpose() * gp.alpha_weights();
  const int k = quantile_order_index(ctx.alpha(), model.M()) - 1;
  std::nth_element(means.begin(), means.begin() + k, means.end());
  return means[k];
}

double deviation_number(const AcquisitionContext& ctx, const Vec& x, const Vec& u) {
  Vec joint(x.size() + u.size());
  joint << x, u;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < ctx.num_constraints(); ++i) {
    const GpPosterior& gp = ctx.constraint_gp(i);
    const double m = gp.mean(joint);
    const double sd = std::sqrt(gp.variance(joint));
    double dn;
    if (sd > 0.0) dn = std::abs(m) / sd;
    else dn = m == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    best = std::min(best, dn);
  }
  return best;
}

}  // namespace ccbo
