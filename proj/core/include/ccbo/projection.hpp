#pragma once

#include <memory>

#include "ccbo/gp.hpp"
#include "ccbo/quasirandom.hpp"

namespace ccbo {

/// Gaussian law of the one-step-ahead mean m_Z^(t+1)(x_targ).
struct UpdatedMeanLaw {
  double mean = 0.0;
  double sd = 0.0;
};

/// Z(x) = E_U[F(x, U)], the projection of the objective GP onto the design
/// space. Every u-integral is the equal-weight rule on the CRN u-points, so
/// m_Z and k_Z are exact linear functionals of F under that rule.
class ZProcess {
 public:
  ZProcess(std::shared_ptr<const GpPosterior> f_gp,
           std::shared_ptr<const CrnSet> crn);

  const GpPosterior& gp() const { return slices_.gp(); }
  const CrnSet& crn() const { return *crn_; }
  const SliceModel& slices() const { return slices_; }

  double mean(const Vec& x) const;
  double covariance(const Vec& x, const Vec& x2) const;
  // k_Z(x, x) floored at zero.
  double variance(const Vec& x) const;
  double sd(const Vec& x) const;

  // Same quantities from a slice already computed at x.
  double mean(const SliceModel::Slice& slice) const;
  double variance(const SliceModel::Slice& slice) const;

  /// (1/M) sum_j k^(t)((x, u_j), c): the u-averaged posterior covariance
  /// between the slice at x and the candidate joint point c.
  double averaged_cross_covariance(const SliceModel::Slice& slice,
                                   const Vec& candidate) const;

 private:
  std::shared_ptr<const CrnSet> crn_;
  SliceModel slices_;
};

double z_mean(const ZProcess& z, const Vec& x);
double z_cov(const ZProcess& z, const Vec& x, const Vec& x2);

/// N(m_Z^(t)(x_targ), sd^2) with sd = |(1/M) sum_j k^(t)((x_targ,u_j), c)|
/// / sqrt(k^(t)(c, c)). Throws DegeneratePointError when the candidate
/// carries no posterior variance.
UpdatedMeanLaw updated_mean_law(const ZProcess& z, const Vec& x_targ,
                                const Vec& candidate);
UpdatedMeanLaw updated_mean_law(const ZProcess& z,
                                const SliceModel::Slice& targ_slice,
                                const Vec& candidate);

/// k_Z^(t+1)(x_targ, x_targ) after conditioning on the candidate; it does not
/// depend on the (unknown) observed value. Equals k_Z^(t) - sd_law^2.
double updated_z_variance(const ZProcess& z, const Vec& x_targ,
                          const Vec& candidate);

}  // namespace ccbo
