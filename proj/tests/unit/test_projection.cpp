#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "ccbo/errors.hpp"
#include "ccbo/projection.hpp"
#include "oracles.hpp"

using namespace ccbo;

namespace {

struct Fixture {
  std::shared_ptr<const CrnSet> crn;
  std::shared_ptr<const GpPosterior> gp;
  std::shared_ptr<const ZProcess> z;
};

Fixture random_fixture(std::uint64_t seed, int M, int n = 15) {
  std::mt19937_64 rng(seed);
  const auto p = analytical_benchmark();
  Fixture f;
  f.crn = std::make_shared<const CrnSet>(make_crn(p, M, 4, seed));
  f.gp = std::make_shared<const GpPosterior>(oracle::random_gp(rng, n, 4));
  f.z = std::make_shared<const ZProcess>(f.gp, f.crn);
  return f;
}

Vec joint(const Vec& x, const Mat& u_unit, int j) {
  Vec q(x.size() + u_unit.cols());
  q << x, u_unit.row(j).transpose();
  return q;
}

// (1/M^2) sum_j sum_k k((x,u_j),(x2,u_k)) term by term.
double z_cov_bruteforce(const Fixture& f, const Vec& x, const Vec& x2) {
  const Mat& U = f.crn->u_unit();
  double acc = 0.0;
  for (int j = 0; j < U.rows(); ++j)
    for (int k = 0; k < U.rows(); ++k) acc += f.gp->covariance(joint(x, U, j), joint(x2, U, k));
  return acc / static_cast<double>(U.rows() * U.rows());
}

}  // namespace

TEST(ZProcess, PriorMeanIsTrend) {
  const auto p = analytical_benchmark();
  auto crn = std::make_shared<const CrnSet>(make_crn(p, 40, 2));
  auto gp = std::make_shared<const GpPosterior>(GpPosterior::prior(KernelSpec{Vec::Constant(4, 0.4), 1.0}, -2.5, 4));
  const ZProcess z(gp, crn);
  EXPECT_DOUBLE_EQ(z_mean(z, Vec{{0.2, 0.9}}), -2.5);
  EXPECT_GT(z.variance(Vec{{0.2, 0.9}}), 0.0);
}

TEST(ZProcess, MeanAveragesSlice) {
  const auto f = random_fixture(1, 37);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const Vec x = oracle::uniform_point(rng, 2);
    double acc = 0.0;
    for (int j = 0; j < 37; ++j) acc += f.gp->mean(joint(x, f.crn->u_unit(), j));
    EXPECT_NEAR(z_mean(*f.z, x), acc / 37.0, 1e-10);
    EXPECT_NEAR(f.z->mean(f.z->slices().at(x)), acc / 37.0, 1e-10);
  }
}

TEST(ZProcess, CovarianceMatchesDoubleSum) {
  const auto f = random_fixture(3, 23);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    const Vec x = oracle::uniform_point(rng, 2), x2 = oracle::uniform_point(rng, 2);
    EXPECT_NEAR(z_cov(*f.z, x, x2), z_cov_bruteforce(f, x, x2), 1e-10);
    EXPECT_NEAR(z_cov(*f.z, x, x), z_cov_bruteforce(f, x, x), 1e-10);
    EXPECT_NEAR(f.z->variance(x), z_cov(*f.z, x, x), 1e-12);
  }
}

TEST(ZProcess, CovarianceSymmetricAndNonnegative) {
  const auto f = random_fixture(5, 50);
  std::mt19937_64 rng(6);
  for (int k = 0; k < 100; ++k) {
    const Vec x = oracle::uniform_point(rng, 2), x2 = oracle::uniform_point(rng, 2);
    EXPECT_EQ(z_cov(*f.z, x, x2), z_cov(*f.z, x2, x));
    EXPECT_GE(z_cov(*f.z, x, x), 0.0);
  }
}

TEST(ZProcess, SingleAtomQuadrature) {
  const auto f = random_fixture(7, 1);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 10; ++k) {
    const Vec x = oracle::uniform_point(rng, 2), x2 = oracle::uniform_point(rng, 2);
    EXPECT_NEAR(z_mean(*f.z, x), f.gp->mean(joint(x, f.crn->u_unit(), 0)), 1e-12);
    EXPECT_NEAR(z_cov(*f.z, x, x2), f.gp->covariance(joint(x, f.crn->u_unit(), 0), joint(x2, f.crn->u_unit(), 0)),
                1e-12);
  }
}

TEST(ZProcess, ObservedSliceHasNoVariance) {
  const auto p = analytical_benchmark();
  auto crn = std::make_shared<const CrnSet>(make_crn(p, 30, 2));
  const Vec x{{0.3, 0.6}};
  Mat X(30, 4);
  Vec y(30);
  for (int j = 0; j < 30; ++j) {
    X.row(j) = joint(x, crn->u_unit(), j).transpose();
    y[j] = std::cos(4 * X(j, 2)) * X(j, 3);
  }
  auto gp = std::make_shared<const GpPosterior>(
      GpPosterior::condition(KernelSpec{Vec::Constant(4, 0.3), 1.0}, X, y));
  const ZProcess z(gp, crn);
  EXPECT_LE(z.variance(x), 10 * gp->nugget());
  EXPECT_NEAR(z.mean(x), y.mean(), 1e-6);
}

TEST(ZProcess, BenchmarkMeanFromDenseFit) {
  const auto p = analytical_benchmark();
  const auto m = oracle::benchmark_models(200, 300, 4, 1);
  EXPECT_NEAR(z_mean(*m.z, p.normalize_x(Vec{{0.0, 0.0}})), -50.0 / 3.0, 1.0);
}

TEST(UpdatedMeanLaw, CentredOnCurrentMean) {
  const auto f = random_fixture(9, 40);
  std::mt19937_64 rng(10);
  for (int k = 0; k < 10; ++k) {
    const Vec x = oracle::uniform_point(rng, 2);
    const auto law = updated_mean_law(*f.z, x, oracle::uniform_point(rng, 4));
    EXPECT_NEAR(law.mean, z_mean(*f.z, x), 1e-12);
    EXPECT_GE(law.sd, 0.0);
  }
}

TEST(UpdatedMeanLaw, UncorrelatedCandidate) {
  const auto f = random_fixture(11, 40);
  const auto law = updated_mean_law(*f.z, Vec{{0.5, 0.5}}, Vec{{50.0, 50.0, 50.0, 50.0}});
  EXPECT_NEAR(law.sd, 0.0, 1e-12);
  EXPECT_NEAR(updated_z_variance(*f.z, Vec{{0.5, 0.5}}, Vec{{50.0, 50.0, 50.0, 50.0}}), f.z->variance(Vec{{0.5, 0.5}}),
              1e-12);
}

TEST(UpdatedMeanLaw, DegenerateCandidateThrows) {
  const auto f = random_fixture(12, 20);
  EXPECT_THROW(updated_mean_law(*f.z, Vec{{0.5, 0.5}}, f.gp->inputs().row(0).transpose()), DegeneratePointError);
}

TEST(UpdatedMeanLaw, VarianceMatchesReconditionedProcess) {
  const auto f = random_fixture(13, 30);
  std::mt19937_64 rng(14);
  for (int k = 0; k < 8; ++k) {
    const Vec x = oracle::uniform_point(rng, 2), c = oracle::uniform_point(rng, 4);
    Mat X(f.gp->size() + 1, 4);
    X << f.gp->inputs(), c.transpose();
    Vec y(f.gp->size() + 1);
    y << f.gp->outputs(), 0.0;
    auto next = std::make_shared<const GpPosterior>(
        GpPosterior::condition(f.gp->kernel(), X, y, f.gp->trend(), f.gp->jitter()));
    const ZProcess z_next(next, f.crn);
    const double s2 = f.gp->kernel().variance;
    EXPECT_NEAR(updated_z_variance(*f.z, x, c), z_next.variance(x), 1e-8 * s2);
    const auto law = updated_mean_law(*f.z, x, c);
    EXPECT_NEAR(law.sd * law.sd, f.z->variance(x) - z_next.variance(x), 1e-8 * s2);
  }
}

TEST(UpdatedMeanLaw, FabricatedObservationsReproduceLaw) {
  const auto f = random_fixture(15, 60, 12);
  const Vec x{{0.35, 0.55}}, c{{0.4, 0.5, 0.7, 0.2}};
  const auto law = updated_mean_law(*f.z, x, c);
  ASSERT_GT(law.sd, 0.0);

  Mat X(f.gp->size() + 1, 4);
  X << f.gp->inputs(), c.transpose();
  const boost::math::normal std_normal;
  const double m_c = f.gp->mean(c), s_c = std::sqrt(f.gp->variance(c));
  const int draws = 2000;
  std::vector<double> values;
  for (int k = 0; k < draws; ++k) {
    // Stratified draw of the observation at the candidate.
    const double yc = m_c + s_c * boost::math::quantile(std_normal, (k + 0.5) / draws);
    Vec y(f.gp->size() + 1);
    y << f.gp->outputs(), yc;
    auto next = std::make_shared<const GpPosterior>(
        GpPosterior::condition(f.gp->kernel(), X, y, f.gp->trend(), f.gp->jitter()));
    values.push_back(ZProcess(next, f.crn).mean(x));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= draws;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (draws - 1));
  EXPECT_NEAR(mean, law.mean, 1e-6 * law.sd + 1e-12);
  EXPECT_NEAR(sd, law.sd, 0.05 * law.sd);
}
