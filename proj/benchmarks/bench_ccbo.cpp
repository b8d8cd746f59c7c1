#include <memory>

#include <benchmark/benchmark.h>

#include "ccbo/acquisition.hpp"
#include "ccbo/gp.hpp"
#include "ccbo/projection.hpp"
#include "ccbo/quasirandom.hpp"
#include "ccbo/sampling.hpp"

using namespace ccbo;

namespace {

struct Models {
  std::shared_ptr<const CrnSet> crn;
  std::shared_ptr<const ZProcess> z;
  std::shared_ptr<AcquisitionContext> ctx;
};

JointDesign design_of(const ProblemSpec& p, int n) {
  JointDesign d;
  for (const Vec& q : sobol_sequence(4, n))
    d.append(p, evaluate(p, p.denormalize_x(q.head(2)), p.denormalize_u(q.tail(2))));
  return d;
}

// Benchmark models on a 20-point joint design with the default CRN sizes.
const Models& models() {
  static const Models m = [] {
    const auto p = analytical_benchmark();
    const auto d = design_of(p, 20);
    FitOptions opts;
    opts.restarts = 2;
    Models out;
    out.crn = std::make_shared<const CrnSet>(make_crn(p, kDefaultCrnM, kDefaultCrnN, 1));
    auto f = std::make_shared<const GpPosterior>(fit(d.joint_inputs(p), d.objective_values(), opts));
    auto g = std::make_shared<const GpPosterior>(fit(d.joint_inputs(p), d.constraint_values(0), opts));
    out.z = std::make_shared<const ZProcess>(f, out.crn);
    out.ctx = std::make_shared<AcquisitionContext>(out.z, std::vector{g}, out.crn, p.alpha());
    out.ctx->set_z_min_feas(out.z->mean(Vec{{0.3, 0.4}}));
    return out;
  }();
  return m;
}

void BM_Sobol(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(sobol_matrix(4, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Sobol)->Arg(300)->Arg(4096);

void BM_GpFit(benchmark::State& state) {
  const auto p = analytical_benchmark();
  const auto d = design_of(p, static_cast<int>(state.range(0)));
  FitOptions opts;
  opts.restarts = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(d.joint_inputs(p), d.objective_values(), opts));
}
BENCHMARK(BM_GpFit)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_Efi(benchmark::State& state) {
  const auto& m = models();
  const Vec x{{0.35, 0.45}};
  for (auto _ : state) benchmark::DoNotOptimize(efi(*m.ctx, x));
}
BENCHMARK(BM_Efi)->Unit(benchmark::kMillisecond);

void BM_SamplingCriterion(benchmark::State& state) {
  const auto& m = models();
  const SamplingContext sc(*m.ctx, Vec{{0.35, 0.45}});
  const Vec c{{0.35, 0.45, 0.6, 0.2}};
  for (auto _ : state) benchmark::DoNotOptimize(sampling_criterion(sc, c));
}
BENCHMARK(BM_SamplingCriterion)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
