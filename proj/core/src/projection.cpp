#include "ccbo/projection.hpp"

#include <algorithm>
#include <cmath>

#include "ccbo/errors.hpp"

namespace ccbo {

namespace {

// Averaged whitened cross-covariance (1/M) sum_j L^{-1} k(X, (x, u_j)).
Vec averaged_whitened(const SliceModel::Slice& slice) {
  if (slice.whitened.rows() == 0) return Vec(0);
  return slice.whitened.rowwise().mean();
}

Vec averaged_whitened(const SliceModel& model, const Vec& x) {
  const GpPosterior& gp = model.gp();
  if (gp.size() == 0) return Vec(0);
  return gp.whiten(Vec(gp.cross(model.joint_points(x)).rowwise().mean()));
}

}  // namespace

ZProcess::ZProcess(std::shared_ptr<const GpPosterior> f_gp, std::shared_ptr<const CrnSet> crn)
    : crn_(std::move(crn)), slices_(std::move(f_gp), crn_->u_unit()) {}

double ZProcess::mean(const Vec& x) const {
  const GpPosterior& f = gp();
  if (f.size() == 0) return f.trend();
  const Vec k_bar = f.cross(slices_.joint_points(x)).rowwise().mean();
  return f.trend() + k_bar.dot(f.alpha_weights());
}

double ZProcess::covariance(const Vec& x, const Vec& x2) const {
  // Fixed argument order makes the result exactly symmetric.
  if (std::lexicographical_compare(x2.begin(), x2.end(), x.begin(), x.end())) return covariance(x2, x);
  const double prior = x == x2 ? slices_.prior_cov_mean()
                               : gp().kernel().gram(slices_.joint_points(x), slices_.joint_points(x2)).mean();
  if (gp().size() == 0) return prior;
  return prior - averaged_whitened(slices_, x).dot(averaged_whitened(slices_, x2));
}

double ZProcess::variance(const Vec& x) const {
  if (gp().size() == 0) return slices_.prior_cov_mean();
  return std::max(0.0, slices_.prior_cov_mean() - averaged_whitened(slices_, x).squaredNorm());
}

double ZProcess::sd(const Vec& x) const { return std::sqrt(variance(x)); }

double ZProcess::mean(const SliceModel::Slice& slice) const { return slice.mean.mean(); }

double ZProcess::variance(const SliceModel::Slice& slice) const {
  if (gp().size() == 0) return slices_.prior_cov_mean();
  return std::max(0.0, slices_.prior_cov_mean() - averaged_whitened(slice).squaredNorm());
}

double ZProcess::averaged_cross_covariance(const SliceModel::Slice& slice, const Vec& candidate) const {
  const double prior = gp().kernel().gram(slice.points, candidate.transpose()).mean();
  if (gp().size() == 0) return prior;
  return prior - averaged_whitened(slice).dot(gp().whiten(gp().cross(candidate)));
}

double z_mean(const ZProcess& z, const Vec& x) { return z.mean(x); }

double z_cov(const ZProcess& z, const Vec& x, const Vec& x2) { return z.covariance(x, x2); }

UpdatedMeanLaw updated_mean_law(const ZProcess& z, const SliceModel::Slice& targ_slice, const Vec& candidate) {
  const OneStepUpdate update = one_step_update(z.gp(), candidate);
  const double cross = z.averaged_cross_covariance(targ_slice, candidate);
  return {z.mean(targ_slice), std::abs(cross) / std::sqrt(update.new_point_variance() + z.gp().nugget())};
}

UpdatedMeanLaw updated_mean_law(const ZProcess& z, const Vec& x_targ, const Vec& candidate) {
  return updated_mean_law(z, z.slices().at(x_targ), candidate);
}

double updated_z_variance(const ZProcess& z, const Vec& x_targ, const Vec& candidate) {
  const auto slice = z.slices().at(x_targ);
  const UpdatedMeanLaw law = updated_mean_law(z, slice, candidate);
  return std::max(0.0, z.variance(slice) - law.sd * law.sd);
}

}  // namespace ccbo
