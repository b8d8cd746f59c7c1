#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "ccbo/gp.hpp"
#include "ccbo/projection.hpp"

namespace ccbo {

double normal_cdf(double z);
double normal_pdf(double z);

/// EI = (z_min - m) Phi(d) + sd phi(d), d = (z_min - m) / sd.
/// With sd = 0 this is max(z_min - m, 0).
double expected_improvement(double m, double sd, double z_min);

/// Variance of the improvement (z_min - Z)^+ for Z ~ N(m, sd^2):
/// EI (z_min - m - EI) + sd^2 Phi(d). Zero when sd = 0.
double variance_of_improvement(double m, double sd, double z_min);

/// Models shared by every acquisition of one iteration. All points are in
/// normalized coordinates.
class AcquisitionContext {
 public:
  AcquisitionContext(std::shared_ptr<const ZProcess> z,
                     std::vector<std::shared_ptr<const GpPosterior>> constraint_gps,
                     std::shared_ptr<const CrnSet> crn, double alpha);

  const ZProcess& z() const { return *z_; }
  const CrnSet& crn() const { return *crn_; }
  double alpha() const { return alpha_; }
  int num_constraints() const { return static_cast<int>(constraint_slices_.size()); }
  const SliceModel& constraint_slices(int i) const { return constraint_slices_.at(i); }
  const GpPosterior& constraint_gp(int i) const { return constraint_slices_.at(i).gp(); }

  const std::optional<double>& z_min_feas() const { return z_min_feas_; }
  void set_z_min_feas(double value);

 private:
  std::shared_ptr<const ZProcess> z_;
  std::shared_ptr<const CrnSet> crn_;
  std::vector<SliceModel> constraint_slices_;
  double alpha_;
  std::optional<double> z_min_feas_;
};

/// Phi(-m / sd), resolved by the sign of m when sd = 0.
double prob_nonpositive(double m, double sd);

/// (1/N) sum_k 1{ 1 - alpha - (1/M) sum_j 1{G_i,k(x,u_j) <= 0 for all i} <= 0 },
/// trajectories from the CRN normal blocks (one block per constraint).
double prob_feasible_with_confidence(const AcquisitionContext& ctx, const Vec& x);

/// (1/(N M)) sum_k sum_j 1{G_i,k(x,u_j) <= 0 for all i}: the trajectory
/// estimate of P_U(g_i(x,U) <= 0 for all i).
double feasibility_fraction(const AcquisitionContext& ctx, const Vec& x);

/// (1/M) sum_j prod_i Phi(-m_Gi(x,u_j) / sd_Gi(x,u_j)).
double averaged_feasibility(const AcquisitionContext& ctx, const Vec& x);

/// E[C(x)] = 1 - alpha - averaged_feasibility(x).
double expected_c(const AcquisitionContext& ctx, const Vec& x);

struct Incumbent {
  double z_min_feas = 0.0;
  Vec x;
  // False when no candidate satisfies E[C] <= 0 and the most feasible
  // candidate was used instead.
  bool feasible = false;
};

/// argmin of m_Z over candidates with E[C] <= 0, else the candidate with the
/// largest averaged feasibility. Throws PreconditionError on an empty list.
Incumbent current_feasible_min(const AcquisitionContext& ctx,
                               const std::vector<Vec>& candidate_xs);

/// EI(m_Z(x), sd_Z(x), z_min_feas) * prob_feasible_with_confidence(x).
/// Throws PreconditionError when z_min_feas is unset.
double efi(const AcquisitionContext& ctx, const Vec& x);

/// EI of Z at x against z_min_feas.
double expected_improvement_z(const AcquisitionContext& ctx, const Vec& x);

/// The ceil((1 - alpha) M)-th smallest of {m_Gi(x, u_j)}.
double empirical_quantile_constraint(const AcquisitionContext& ctx,
                                     const Vec& x, int i);

/// 1-based order-statistic index used for the (1 - alpha) quantile.
int quantile_order_index(double alpha, int M);

/// min_i |m_Gi(x,u)| / sd_Gi(x,u); +inf when sd = 0 and m != 0, 0 when both
/// vanish.
double deviation_number(const AcquisitionContext& ctx, const Vec& x,
                        const Vec& u);

}  // namespace ccbo
