#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

#include "ccbo/problem.hpp"
#include "ccbo/quasirandom.hpp"

namespace ccbo {

/// Anisotropic Matern-5/2 covariance, k(a,b) = variance * rho(r) with
/// r^2 = sum_i ((a_i - b_i) / lengthscale_i)^2.
struct KernelSpec {
  Vec lengthscales;
  double variance = 1.0;

  static double matern52(double r);

  void validate() const;
  double correlation(const Vec& a, const Vec& b) const;
  double operator()(const Vec& a, const Vec& b) const {
    return variance * correlation(a, b);
  }
  // Gram matrix between the rows of A and the rows of B.
  Mat gram(const Mat& A, const Mat& B) const;
};

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

/// Noise-free GP with a constant trend, conditioned on joint-space data.
///
/// The regularized kernel matrix is K + tau * I where tau (the nugget) is
/// jitter * variance; jitter starts at kJitterStart and escalates by 10x up
/// to kJitterMax until the Cholesky factorization succeeds. Predictions use
/// the plug-in (simple kriging) equations with the estimated trend.
class GpPosterior {
 public:
  /// Conditions on (inputs, outputs) with fixed kernel hyperparameters.
  /// Without `trend` the constant trend is the generalized least-squares
  /// estimate. A fixed `jitter` disables escalation. Throws ModelError.
  static GpPosterior condition(KernelSpec kernel, Mat inputs, Vec outputs,
                               std::optional<double> trend = std::nullopt,
                               std::optional<double> jitter = std::nullopt);

  /// GP without observations.
  static GpPosterior prior(KernelSpec kernel, double trend, int dim);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(inputs_.rows()); }
  const KernelSpec& kernel() const { return kernel_; }
  double trend() const { return trend_; }
  double jitter() const { return jitter_; }
  double nugget() const { return jitter_ * kernel_.variance; }
  const Mat& inputs() const { return inputs_; }
  const Vec& outputs() const { return outputs_; }
  const Mat& factor() const { return factor_; }
  const Vec& alpha_weights() const { return alpha_weights_; }

  double mean(const Vec& p) const;
  double variance(const Vec& p) const;
  double covariance(const Vec& p, const Vec& q) const;

  // k(X, p) for all training inputs X.
  Vec cross(const Vec& p) const;
  // n x P matrix k(X, points) for points given as rows.
  Mat cross(const Mat& points) const;
  // L^{-1} v for the lower Cholesky factor L.
  Vec whiten(const Vec& v) const;
  Mat whiten(const Mat& V) const;

  /// Concentrated (trend and variance profiled) log marginal likelihood of
  /// the training data under the current lengthscales.
  double log_marginal_likelihood() const;

 private:
  GpPosterior() = default;

  int dim_ = 0;
  KernelSpec kernel_;
  double trend_ = 0.0;
  double jitter_ = 0.0;
  Mat inputs_;
  Vec outputs_;
  Mat factor_;
  Vec alpha_weights_;
};

struct FitOptions {
  int restarts = 5;
  double min_lengthscale = 0.05;
  double max_lengthscale = 10.0;
  int evaluations_per_dim = 60;  // per restart
  std::uint64_t seed = 0;
};

/// Concentrated log marginal likelihood for given lengthscales; the trend
/// and the variance are profiled out in closed form. Returns -inf when the
/// correlation matrix cannot be factored even at the largest jitter.
double profile_log_likelihood(const Mat& inputs, const Vec& outputs,
                              const Vec& lengthscales);

/// Maximizes the profile likelihood over log-lengthscales with a multi-start
/// derivative-free search. Requires >= 2 distinct inputs.
GpPosterior fit(const Mat& inputs, const Vec& outputs,
                const FitOptions& options = {});

struct Prediction {
  Vec mean;
  Mat cov;
};

Prediction predict(const GpPosterior& gp, const Mat& points);

/// Refit-free conditioning on one more (yet unobserved) point.
///
/// covariance(p,q) = k(p,q) - k(p,c) k(q,c) / k(c,c) and
/// mean_coefficient(p) = k(p,c) / k(c,c), where k is the current posterior
/// covariance and the denominator includes the model nugget so that the
/// update agrees with re-conditioning the same model on t + 1 points.
class OneStepUpdate {
 public:
  OneStepUpdate(const GpPosterior& gp, Vec new_point);

  const Vec& new_point() const { return new_point_; }
  double new_point_variance() const { return new_var_; }
  double covariance(const Vec& p, const Vec& q) const;
  double variance(const Vec& p) const;
  double mean_coefficient(const Vec& p) const;
  // Current posterior covariance k(p, c).
  double cross_covariance(const Vec& p) const;

 private:
  const GpPosterior* gp_;
  Vec new_point_;
  Vec whitened_new_;
  double new_var_;
  double denominator_;
};

/// Throws DegeneratePointError when the posterior variance at new_point is
/// below 10 * nugget.
OneStepUpdate one_step_update(const GpPosterior& gp, const Vec& new_point);

/// N x M GP realizations at {(x, u_j)}.
struct TrajectoryEnsemble {
  Mat values;
  Vec mean;
  int rank = 0;
};

/// Posterior of one GP on the u-slice {(x, u_j), j = 1..M} of the joint
/// space, for the frozen CRN u-points.
///
/// For a stationary kernel the prior covariance between (x, u_j) and
/// (x, u_k) does not depend on x, so it is computed once here.
class SliceModel {
 public:
  static constexpr double kRankTolerance = 1e-10;

  SliceModel(std::shared_ptr<const GpPosterior> gp, Mat u_unit);

  struct Slice {
    Vec x;
    Mat points;     // M x (d + m) joint inputs
    Mat whitened;   // n x M, L^{-1} k(X, points)
    Vec mean;       // M
    Vec variance;   // M, floored at 0
  };

  const GpPosterior& gp() const { return *gp_; }
  std::shared_ptr<const GpPosterior> gp_ptr() const { return gp_; }
  int M() const { return static_cast<int>(u_unit_.rows()); }
  const Mat& u_unit() const { return u_unit_; }
  const Mat& prior_cov() const { return prior_cov_; }
  // (1/M^2) sum_jk of the prior slice covariance.
  double prior_cov_mean() const { return prior_cov_mean_; }

  Mat joint_points(const Vec& x) const;
  Slice at(const Vec& x) const;

  /// Realizations mean + L z with L a pivoted Cholesky factor of the slice
  /// posterior covariance, truncated once the largest remaining diagonal
  /// falls below kRankTolerance * variance. Row k uses the first rank(L)
  /// entries of normal_block row k.
  TrajectoryEnsemble simulate(const Slice& slice, const Mat& normal_block) const;

 private:
  std::shared_ptr<const GpPosterior> gp_;
  Mat u_unit_;
  Mat prior_cov_;
  double prior_cov_mean_ = 0.0;
};

/// N joint realizations of the GP over {(x, u_j)} using the CRN normal block.
TrajectoryEnsemble simulate_joint(const GpPosterior& gp, const Vec& x_unit,
                                  const CrnSet& crn, int block = 0);

/// Hyperparameters, trend and training set as JSON.
void write_model(const GpPosterior& gp, const std::filesystem::path& path);

}  // namespace ccbo
