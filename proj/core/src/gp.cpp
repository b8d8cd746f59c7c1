#include "ccbo/gp.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "ccbo/errors.hpp"
#include "ccbo/optimizers.hpp"

namespace ccbo {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pairwise scaled distances between rows of A and rows of B.
Mat scaled_distances(const Mat& A, const Mat& B, const Vec& lengthscales) {
  const Vec inv = lengthscales.cwiseInverse();
  const Mat As = A * inv.asDiagonal();
  const Mat Bs = B * inv.asDiagonal();
  Mat d2 = (-2.0 * As * Bs.transpose()).colwise() + As.rowwise().squaredNorm();
  d2.rowwise() += Bs.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

Mat correlation_matrix(const Mat& A, const Mat& B, const Vec& lengthscales) {
  return scaled_distances(A, B, lengthscales).unaryExpr(&KernelSpec::matern52);
}

struct Factored {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
};

// Cholesky of C + jitter * scale * I, escalating the jitter on failure.
std::optional<Factored> factor_with_jitter(const Mat& C, double scale, std::optional<double> fixed) {
  const double first = fixed.value_or(kJitterStart);
  const double last = fixed.value_or(kJitterMax);
  for (double jitter = first; jitter <= last * (1.0 + 1e-12); jitter *= 10.0) {
    Mat regularized = C;
    regularized.diagonal().array() += jitter * scale;
    Factored f{Eigen::LLT<Mat>(regularized), jitter};
    if (f.llt.info() == Eigen::Success && (f.llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
      return f;
  }
  return std::nullopt;
}

double gls_trend(const Eigen::LLT<Mat>& llt, const Vec& y) {
  const Vec w1 = llt.matrixL().solve(Vec::Ones(y.size()));
  const Vec wy = llt.matrixL().solve(y);
  return w1.dot(wy) / w1.squaredNorm();
}

double variance_floor(const Vec& y) {
  const double scale = y.size() ? y.cwiseAbs().maxCoeff() : 0.0;
  return 1e-14 * (1.0 + scale * scale);
}

struct Profile {
  double log_likelihood = kNegInf;
  double variance = 0.0;
};

Profile profile(const Mat& X, const Vec& y, const Vec& lengthscales) {
  const Mat R = correlation_matrix(X, X, lengthscales);
  const auto f = factor_with_jitter(R, 1.0, std::nullopt);
  if (!f) return {};
  const double mu = gls_trend(f->llt, y);
  const Vec r = f->llt.matrixL().solve((y.array() - mu).matrix());
  const auto n = static_cast<double>(y.size());
  const double s2 = std::max(r.squaredNorm() / n, variance_floor(y));
  const double log_det = 2.0 * f->llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return {-0.5 * n * std::log(s2) - 0.5 * log_det - 0.5 * n * (1.0 + std::log(2.0 * std::numbers::pi)), s2};
}

}  // namespace

double KernelSpec::matern52(double r) {
  const double s = kSqrt5 * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

void KernelSpec::validate() const {
  if (lengthscales.size() == 0) throw PreconditionError("kernel needs at least one lengthscale");
  if (!(variance > 0.0) || !std::isfinite(variance)) throw PreconditionError("kernel variance must be positive");
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
      throw PreconditionError("kernel lengthscales must be positive");
}

double KernelSpec::correlation(const Vec& a, const Vec& b) const {
  return matern52((a - b).cwiseQuotient(lengthscales).norm());
}

Mat KernelSpec::gram(const Mat& A, const Mat& B) const {
  return variance * correlation_matrix(A, B, lengthscales);
}

GpPosterior GpPosterior::condition(KernelSpec kernel, Mat inputs, Vec outputs, std::optional<double> trend,
                                   std::optional<double> jitter) {
  kernel.validate();
  if (inputs.rows() != outputs.size()) throw PreconditionError("inputs and outputs differ in length");
  if (inputs.cols() != kernel.lengthscales.size()) throw PreconditionError("input dimension differs from kernel");

  GpPosterior gp;
  gp.dim_ = static_cast<int>(inputs.cols());
  gp.kernel_ = std::move(kernel);
  if (inputs.rows() == 0) {
    gp.trend_ = trend.value_or(0.0);
    gp.inputs_ = std::move(inputs);
    gp.outputs_ = std::move(outputs);
    return gp;
  }

  const Mat K = gp.kernel_.gram(inputs, inputs);
  auto f = factor_with_jitter(K, gp.kernel_.variance, jitter);
  if (!f) throw ModelError("kernel matrix not positive definite at the largest jitter");
  gp.jitter_ = f->jitter;
  gp.factor_ = f->llt.matrixL();
  gp.trend_ = trend ? *trend : gls_trend(f->llt, outputs);
  gp.alpha_weights_ = f->llt.solve((outputs.array() - gp.trend_).matrix());
  gp.inputs_ = std::move(inputs);
  gp.outputs_ = std::move(outputs);
  return gp;
}

GpPosterior GpPosterior::prior(KernelSpec kernel, double trend, int dim) {
  return condition(std::move(kernel), Mat(0, dim), Vec(0), trend);
}

Vec GpPosterior::cross(const Vec& p) const {
  return kernel_.gram(inputs_, p.transpose()).col(0);
}

Mat GpPosterior::cross(const Mat& points) const { return kernel_.gram(inputs_, points); }

Vec GpPosterior::whiten(const Vec& v) const {
  if (size() == 0) return Vec(0);
  return factor_.triangularView<Eigen::Lower>().solve(v);
}

Mat GpPosterior::whiten(const Mat& V) const {
  if (size() == 0) return Mat(0, V.cols());
  return factor_.triangularView<Eigen::Lower>().solve(V);
}

double GpPosterior::mean(const Vec& p) const {
  if (size() == 0) return trend_;
  return trend_ + cross(p).dot(alpha_weights_);
}

double GpPosterior::covariance(const Vec& p, const Vec& q) const {
  const double prior_cov = kernel_(p, q);
  if (size() == 0) return prior_cov;
  return prior_cov - whiten(cross(p)).dot(whiten(cross(q)));
}

double GpPosterior::variance(const Vec& p) const {
  if (size() == 0) return kernel_.variance;
  return std::max(0.0, kernel_.variance - whiten(cross(p)).squaredNorm());
}

double GpPosterior::log_marginal_likelihood() const {
  if (size() == 0) return 0.0;
  const auto n = static_cast<double>(size());
  const Vec r = whiten(Vec((outputs_.array() - trend_).matrix()));
  // Correlation-scale quantities: R = K / variance.
  const double s2 = std::max(kernel_.variance * r.squaredNorm() / n, variance_floor(outputs_));
  const double log_det = 2.0 * factor_.diagonal().array().log().sum() - n * std::log(kernel_.variance);
  return -0.5 * n * std::log(s2) - 0.5 * log_det - 0.5 * n * (1.0 + std::log(2.0 * std::numbers::pi));
}

double profile_log_likelihood(const Mat& inputs, const Vec& outputs, const Vec& lengthscales) {
  return profile(inputs, outputs, lengthscales).log_likelihood;
}

GpPosterior fit(const Mat& inputs, const Vec& outputs, const FitOptions& options) {
  if (inputs.rows() != outputs.size()) throw PreconditionError("inputs and outputs differ in length");
  bool distinct = false;
  for (Eigen::Index i = 1; i < inputs.rows() && !distinct; ++i)
    distinct = (inputs.row(i) - inputs.row(0)).norm() > 0.0;
  if (!distinct) throw PreconditionError("GP fit needs at least two distinct inputs");

  const int D = static_cast<int>(inputs.cols());
  const BoxDomain box(Vec::Constant(D, std::log(options.min_lengthscale)),
                      Vec::Constant(D, std::log(options.max_lengthscale)));
  const int budget = std::max(D + 2, std::max(options.restarts, 1) * options.evaluations_per_dim * D);

  SolveReport best;
  try {
    best = maximize_unconstrained(
        [&](const Vec& log_l) { return profile_log_likelihood(inputs, outputs, log_l.array().exp().matrix()); },
        box, budget, options.restarts, options.seed);
  } catch (const SolverError&) {
    throw ModelError("likelihood could not be evaluated at any lengthscale");
  }

  KernelSpec kernel{best.best_point.array().exp().matrix(), 1.0};
  kernel.variance = profile(inputs, outputs, kernel.lengthscales).variance;
  return GpPosterior::condition(std::move(kernel), inputs, outputs);
}

Prediction predict(const GpPosterior& gp, const Mat& points) {
  Prediction out;
  const Mat k = gp.cross(points);
  out.mean = Vec::Constant(points.rows(), gp.trend());
  if (gp.size() > 0) out.mean += k.transpose() * gp.alpha_weights();
  out.cov = gp.kernel().gram(points, points);
  if (gp.size() > 0) {
    const Mat w = gp.whiten(k);
    out.cov.noalias() -= w.transpose() * w;
  }
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

OneStepUpdate::OneStepUpdate(const GpPosterior& gp, Vec new_point)
    : gp_(&gp), new_point_(std::move(new_point)) {
  whitened_new_ = gp.whiten(gp.cross(new_point_));
  new_var_ = std::max(0.0, gp.kernel().variance - whitened_new_.squaredNorm());
  denominator_ = new_var_ + gp.nugget();
}

double OneStepUpdate::cross_covariance(const Vec& p) const {
  const double prior_cov = gp_->kernel()(p, new_point_);
  if (gp_->size() == 0) return prior_cov;
  return prior_cov - gp_->whiten(gp_->cross(p)).dot(whitened_new_);
}

double OneStepUpdate::covariance(const Vec& p, const Vec& q) const {
  return gp_->covariance(p, q) - cross_covariance(p) * cross_covariance(q) / denominator_;
}

double OneStepUpdate::variance(const Vec& p) const {
  const double c = cross_covariance(p);
  return std::max(0.0, gp_->variance(p) - c * c / denominator_);
}

double OneStepUpdate::mean_coefficient(const Vec& p) const { return cross_covariance(p) / denominator_; }

OneStepUpdate one_step_update(const GpPosterior& gp, const Vec& new_point) {
  OneStepUpdate update(gp, new_point);
  const double floor = 10.0 * std::max(gp.nugget(), kJitterStart * gp.kernel().variance);
  if (update.new_point_variance() < floor)
    throw DegeneratePointError("candidate point has no posterior variance left");
  return update;
}

SliceModel::SliceModel(std::shared_ptr<const GpPosterior> gp, Mat u_unit)
    : gp_(std::move(gp)), u_unit_(std::move(u_unit)) {
  const int m = static_cast<int>(u_unit_.cols());
  const Vec& ls = gp_->kernel().lengthscales;
  if (ls.size() <= m) throw PreconditionError("slice model needs a joint-space GP");
  // Points on one slice share x, so only the u-lengthscales matter.
  prior_cov_ = gp_->kernel().variance * correlation_matrix(u_unit_, u_unit_, ls.tail(m));
  prior_cov_mean_ = prior_cov_.mean();
}

Mat SliceModel::joint_points(const Vec& x) const {
  const int d = static_cast<int>(x.size());
  Mat points(M(), d + u_unit_.cols());
  points.leftCols(d).rowwise() = x.transpose();
  points.rightCols(u_unit_.cols()) = u_unit_;
  return points;
}

SliceModel::Slice SliceModel::at(const Vec& x) const {
  Slice s;
  s.x = x;
  s.points = joint_points(x);
  const Mat k = gp_->cross(s.points);
  s.whitened = gp_->whiten(k);
  s.mean = Vec::Constant(M(), gp_->trend());
  if (gp_->size() > 0) s.mean.noalias() += k.transpose() * gp_->alpha_weights();
  s.variance = (gp_->kernel().variance - s.whitened.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  return s;
}

TrajectoryEnsemble SliceModel::simulate(const Slice& slice, const Mat& normal_block) const {
  const int m = M();
  if (normal_block.cols() < m) throw PreconditionError("normal block narrower than the slice");

  Mat cov = prior_cov_;
  if (slice.whitened.rows() > 0) cov.noalias() -= slice.whitened.transpose() * slice.whitened;

  // Pivoted Cholesky, truncated at the rank tolerance.
  Vec diag = cov.diagonal();
  std::vector<bool> used(static_cast<std::size_t>(m), false);
  Mat L = Mat::Zero(m, m);
  const double tol = kRankTolerance * gp_->kernel().variance;
  int rank = 0;
  for (; rank < m; ++rank) {
    Eigen::Index pivot = -1;
    double largest = tol;
    for (int i = 0; i < m; ++i) {
      if (!used[static_cast<std::size_t>(i)] && diag[i] > largest) {
        largest = diag[i];
        pivot = i;
      }
    }
    if (pivot < 0) break;
    used[static_cast<std::size_t>(pivot)] = true;
    Vec col = cov.col(pivot);
    if (rank > 0) col.noalias() -= L.leftCols(rank) * L.row(pivot).leftCols(rank).transpose();
    col /= std::sqrt(largest);
    for (int i = 0; i < m; ++i)
      if (used[static_cast<std::size_t>(i)] && i != pivot) col[i] = 0.0;
    col[pivot] = std::sqrt(largest);
    L.col(rank) = col;
    diag -= col.cwiseAbs2();
  }

  TrajectoryEnsemble out;
  out.rank = rank;
  out.mean = slice.mean;
  out.values = Mat(normal_block.rows(), m);
  out.values.rowwise() = slice.mean.transpose();
  if (rank > 0) out.values.noalias() += normal_block.leftCols(rank) * L.leftCols(rank).transpose();
  return out;
}

TrajectoryEnsemble simulate_joint(const GpPosterior& gp, const Vec& x_unit, const CrnSet& crn, int block) {
  // Non-owning alias: the slice model does not outlive this call.
  const SliceModel model(std::shared_ptr<const GpPosterior>(std::shared_ptr<const GpPosterior>(), &gp),
                         crn.u_unit());
  return model.simulate(model.at(x_unit), crn.normal_block(block));
}

void write_model(const GpPosterior& gp, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["kernel"] = "matern52";
  doc["lengthscales"] = std::vector<double>(gp.kernel().lengthscales.begin(), gp.kernel().lengthscales.end());
  doc["variance"] = gp.kernel().variance;
  doc["trend"] = gp.trend();
  doc["jitter"] = gp.jitter();
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < gp.inputs().rows(); ++i) {
    const Vec row = gp.inputs().row(i).transpose();
    rows.push_back({{"input", std::vector<double>(row.begin(), row.end())}, {"output", gp.outputs()[i]}});
  }
  doc["training"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace ccbo
