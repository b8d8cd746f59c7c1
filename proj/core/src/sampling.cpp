#include "ccbo/sampling.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include <boost/math/distributions/normal.hpp>

#include "ccbo/errors.hpp"
#include "ccbo/optimizers.hpp"
#include "ccbo/quasirandom.hpp"

namespace ccbo {

double Quantizer::mean() const {
  return expect([](double v) { return v; });
}

namespace {

Quantizer lloyd_standard_normal(int K) {
  Quantizer q;
  q.target = {0.0, 1.0};
  const boost::math::normal_distribution<double> normal;
  std::vector<double> x(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) x[k] = boost::math::quantile(normal, (k + 0.5) / K);

  std::vector<double> cdf(static_cast<std::size_t>(K + 1));
  std::vector<double> pdf(static_cast<std::size_t>(K + 1));
  auto boundaries = [&] {
    cdf.front() = 0.0;
    pdf.front() = 0.0;
    cdf.back() = 1.0;
    pdf.back() = 0.0;
    for (int k = 1; k < K; ++k) {
      const double b = 0.5 * (x[k - 1] + x[k]);
      cdf[k] = normal_cdf(b);
      pdf[k] = normal_pdf(b);
    }
  };

  // Centroid condition x_k = E[Z | Z in cell k] iterated to its fixed point.
  for (int iter = 0; iter < 200000 && K > 1; ++iter) {
    boundaries();
    double change = 0.0;
    for (int k = 0; k < K; ++k) {
      const double mass = cdf[k + 1] - cdf[k];
      const double centroid = (pdf[k] - pdf[k + 1]) / mass;
      change = std::max(change, std::abs(centroid - x[k]));
      x[k] = centroid;
    }
    if (change < 1e-14) break;
  }
  boundaries();
  q.nodes = x;
  q.weights.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) q.weights[k] = cdf[k + 1] - cdf[k];
  if (K == 1) q.nodes = {0.0};
  return q;
}

}  // namespace

const Quantizer& standard_normal_quantizer(int K) {
  if (K < 1) throw PreconditionError("quantizer size must be at least 1");
  static std::mutex mutex;
  static std::map<int, Quantizer> cache;
  const std::lock_guard lock(mutex);
  auto it = cache.find(K);
  if (it == cache.end()) it = cache.emplace(K, lloyd_standard_normal(K)).first;
  return it->second;
}

Quantizer quantize_normal(const UpdatedMeanLaw& law, int K) {
  Quantizer q;
  q.target = law;
  if (!(law.sd > 0.0)) {
    if (K < 1) throw PreconditionError("quantizer size must be at least 1");
    q.nodes = {law.mean};
    q.weights = {1.0};
    return q;
  }
  const Quantizer& ref = standard_normal_quantizer(K);
  q.weights = ref.weights;
  q.nodes.reserve(ref.nodes.size());
  for (double z : ref.nodes) q.nodes.push_back(law.mean + law.sd * z);
  return q;
}

SamplingContext::SamplingContext(const AcquisitionContext& ctx, Vec x_targ)
    : ctx_(&ctx), x_targ_(std::move(x_targ)) {
  if (!ctx.z_min_feas()) throw PreconditionError("sampling needs z_min_feas");
  z_min_feas_ = *ctx.z_min_feas();
  f_slice_ = ctx.z().slices().at(x_targ_);
  z_mean_ = ctx.z().mean(f_slice_);
  z_variance_ = ctx.z().variance(f_slice_);
  for (int i = 0; i < ctx.num_constraints(); ++i) g_slices_.push_back(ctx.constraint_slices(i).at(x_targ_));
}

Vec SamplingContext::candidate(const Vec& u_unit) const {
  Vec joint(x_targ_.size() + u_unit.size());
  joint << x_targ_, u_unit;
  return joint;
}

namespace {

double improvement_moments(const Quantizer& q, double sd_next, double z_min) {
  const double e_vi = q.expect([&](double m) { return variance_of_improvement(m, sd_next, z_min); });
  const double e_ei = q.expect([&](double m) { return expected_improvement(m, sd_next, z_min); });
  const double e_ei2 = q.expect([&](double m) {
    const double ei = expected_improvement(m, sd_next, z_min);
    return ei * ei;
  });
  return e_vi + std::max(0.0, e_ei2 - e_ei * e_ei);
}

double bernoulli_average(const Vec& p) { return (p.array() * (1.0 - p.array())).mean(); }

// Criterion value when the candidate brings no information.
double criterion_without_update(const SamplingContext& s) {
  const double vi = variance_of_improvement(s.z_mean(), std::sqrt(s.z_variance()), s.z_min_feas());
  Vec p = Vec::Ones(s.acquisition().crn().M());
  for (int i = 0; i < s.acquisition().num_constraints(); ++i) {
    const auto& slice = s.constraint_slice(i);
    for (Eigen::Index j = 0; j < p.size(); ++j) p[j] *= prob_nonpositive(slice.mean[j], std::sqrt(slice.variance[j]));
  }
  return vi * bernoulli_average(p);
}

}  // namespace

double improvement_variance_term(const SamplingContext& s, const Vec& candidate, int K) {
  const ZProcess& z = s.acquisition().z();
  const UpdatedMeanLaw law = updated_mean_law(z, s.objective_slice(), candidate);
  const double sd_next = std::sqrt(std::max(0.0, s.z_variance() - law.sd * law.sd));
  return improvement_moments(quantize_normal(law, K), sd_next, s.z_min_feas());
}

double feasibility_variance_term(const SamplingContext& s, const Vec& candidate) {
  const AcquisitionContext& ctx = s.acquisition();
  Vec p = Vec::Ones(ctx.crn().M());
  for (int i = 0; i < ctx.num_constraints(); ++i) {
    const GpPosterior& gp = ctx.constraint_gp(i);
    const auto& slice = s.constraint_slice(i);
    const OneStepUpdate update(gp, candidate);
    // k^(t)((x_targ, u_j), candidate) for every j.
    Vec cross = gp.kernel().gram(slice.points, candidate.transpose()).col(0);
    if (gp.size() > 0) cross.noalias() -= slice.whitened.transpose() * gp.whiten(gp.cross(candidate));
    const double denominator = update.new_point_variance() + gp.nugget();
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double var_next = std::max(0.0, slice.variance[j] - cross[j] * cross[j] / denominator);
      p[j] *= prob_nonpositive(slice.mean[j], std::sqrt(var_next));
    }
  }
  return bernoulli_average(p);
}

double sampling_criterion(const SamplingContext& s, const Vec& candidate, int K) {
  const double improvement = improvement_variance_term(s, candidate, K);
  if (improvement == 0.0) return 0.0;
  return improvement * feasibility_variance_term(s, candidate);
}

Vec select_next_u(const SamplingContext& s, const USelectionOptions& options) {
  const int m = static_cast<int>(s.acquisition().crn().u_unit().cols());
  auto score = [&](const Vec& u) {
    try {
      return -sampling_criterion(s, s.candidate(u), options.K);
    } catch (const DegeneratePointError&) {
      return -criterion_without_update(s);
    }
  };
  const BoxDomain unit = BoxDomain::unit(m);
  try {
    return maximize_unconstrained(score, unit, options.budget, options.starts, options.seed).best_point;
  } catch (const SolverError&) {
  } catch (const PreconditionError&) {
  }
  Vec best = Vec::Constant(m, 0.5);
  double best_value = -std::numeric_limits<double>::infinity();
  for (const Vec& u : sobol_sequence(m, options.fallback_probes)) {
    const double value = score(u);
    if (std::isfinite(value) && value > best_value) {
      best_value = value;
      best = u;
    }
  }
  return best;
}

}  // namespace ccbo
