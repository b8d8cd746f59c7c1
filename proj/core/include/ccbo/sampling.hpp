#pragma once

#include <cstdint>
#include <vector>

#include "ccbo/acquisition.hpp"
#include "ccbo/projection.hpp"

namespace ccbo {

/// Discrete approximation (nodes, weights) of a Gaussian law.
struct Quantizer {
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;  // sum to 1
  UpdatedMeanLaw target;

  double mean() const;
  // sum_k w_k f(node_k)
  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(nodes[k]);
    return acc;
  }
};

/// Optimal (Lloyd fixed point) K-point quantizer of N(0,1); cached per K.
const Quantizer& standard_normal_quantizer(int K);

/// Standard quantizer mapped affinely onto the law. A zero-sd law collapses
/// to a single node at the mean.
Quantizer quantize_normal(const UpdatedMeanLaw& law, int K);

inline constexpr int kDefaultQuantizerSize = 20;

/// State of one sampling solve at a fixed targeted design x_targ.
class SamplingContext {
 public:
  SamplingContext(const AcquisitionContext& ctx, Vec x_targ);

  const AcquisitionContext& acquisition() const { return *ctx_; }
  const Vec& x_targ() const { return x_targ_; }
  double z_min_feas() const { return z_min_feas_; }
  double z_mean() const { return z_mean_; }
  double z_variance() const { return z_variance_; }
  const SliceModel::Slice& objective_slice() const { return f_slice_; }
  const SliceModel::Slice& constraint_slice(int i) const { return g_slices_.at(i); }

  // Joint candidate (x_targ, u) for a normalized u.
  Vec candidate(const Vec& u_unit) const;

 private:
  const AcquisitionContext* ctx_;
  Vec x_targ_;
  double z_min_feas_;
  double z_mean_;
  double z_variance_;
  SliceModel::Slice f_slice_;
  std::vector<SliceModel::Slice> g_slices_;
};

/// E[VI^(t+1)] + Var[EI^(t+1)] at x_targ, the outer moments taken over the
/// K-point quantizer of m_Z^(t+1)(x_targ). Throws DegeneratePointError for a
/// candidate without posterior variance.
double improvement_variance_term(const SamplingContext& s, const Vec& candidate,
                                 int K = kDefaultQuantizerSize);

/// (1/M) sum_j p(u_j)(1 - p(u_j)), p(u) = prod_i Phi(-m_Gi / sqrt(k_Gi^(t+1)))
/// with constraint means frozen and variances updated by the candidate.
double feasibility_variance_term(const SamplingContext& s, const Vec& candidate);

double sampling_criterion(const SamplingContext& s, const Vec& candidate,
                          int K = kDefaultQuantizerSize);

struct USelectionOptions {
  int K = kDefaultQuantizerSize;
  int budget = 200;
  int starts = 3;
  std::uint64_t seed = 0;
  int fallback_probes = 128;
};

/// argmin over normalized u of sampling_criterion(x_targ, u). Degenerate
/// candidates score as the criterion without any update. Falls back to the
/// best of a Sobol probe when the solver fails. Returns a normalized u.
Vec select_next_u(const SamplingContext& s, const USelectionOptions& options = {});

}  // namespace ccbo
