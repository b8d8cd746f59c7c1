#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ccbo/errors.hpp"
#include "ccbo/gp.hpp"
#include "ccbo/stats.hpp"
#include "oracles.hpp"

using namespace ccbo;

namespace {

double matern52_reference(double r) {
  const double s = std::sqrt(5.0) * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Mat random_points(std::mt19937_64& rng, int n, int dim) {
  Mat P(n, dim);
  for (int i = 0; i < n; ++i) P.row(i) = oracle::uniform_point(rng, dim).transpose();
  return P;
}

// Draw from the zero-mean GP with this kernel at X.
Vec sample_gp(const KernelSpec& k, const Mat& X, std::mt19937_64& rng) {
  Mat K = k.gram(X, X);
  K.diagonal().array() += 1e-10 * k.variance;
  const Eigen::LLT<Mat> llt(K);
  std::normal_distribution<double> z;
  const Vec e = Vec::NullaryExpr(X.rows(), [&] { return z(rng); });
  return llt.matrixL() * e;
}

}  // namespace

TEST(Kernel, MaternAtOneLengthscale) {
  EXPECT_NEAR(KernelSpec::matern52(1.0), 0.52400, 1e-5);
  KernelSpec k{Vec{{0.7}}, 1.0};
  EXPECT_NEAR(k(Vec{{0.1}}, Vec{{0.8}}), (1 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0)), 1e-12);
}

TEST(Kernel, AnisotropicDistance) {
  KernelSpec k{Vec{{0.5, 2.0}}, 3.0};
  const Vec a{{0.1, 0.2}}, b{{0.4, 1.0}};
  const double r = std::hypot(0.3 / 0.5, 0.8 / 2.0);
  EXPECT_NEAR(k(a, b), 3.0 * matern52_reference(r), 1e-12);
  EXPECT_DOUBLE_EQ(k(a, a), 3.0);
  EXPECT_THROW((KernelSpec{Vec{{-1.0}}, 1.0}.validate()), PreconditionError);
  EXPECT_THROW((KernelSpec{Vec{{1.0}}, 0.0}.validate()), PreconditionError);
}

TEST(Kernel, GramMatchesPointwise) {
  std::mt19937_64 rng(2);
  KernelSpec k{Vec{{0.3, 0.4, 0.9}}, 1.7};
  const Mat A = random_points(rng, 5, 3), B = random_points(rng, 4, 3);
  const Mat G = k.gram(A, B);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(G(i, j), k(A.row(i).transpose(), B.row(j).transpose()), 1e-14);
}

TEST(Fit, InterpolatesTwoPoints) {
  Mat X(2, 1);
  X << 0, 1;
  const auto gp = fit(X, Vec{{0.0, 1.0}});
  EXPECT_NEAR(gp.mean(Vec{{0.0}}), 0.0, 1e-6);
  EXPECT_NEAR(gp.mean(Vec{{1.0}}), 1.0, 1e-6);
}

TEST(Fit, ConstantOutputs) {
  std::mt19937_64 rng(3);
  const Mat X = random_points(rng, 10, 2);
  const auto gp = fit(X, Vec::Constant(10, 4.25));
  EXPECT_LT(gp.kernel().variance, 1e-6);
  for (int k = 0; k < 20; ++k) EXPECT_NEAR(gp.mean(oracle::uniform_point(rng, 2)), 4.25, 1e-6);
}

TEST(Fit, RequiresDistinctInputs) {
  Mat X = Mat::Constant(3, 2, 0.5);
  EXPECT_THROW(fit(X, Vec{{1.0, 2.0, 3.0}}), PreconditionError);
  EXPECT_THROW(fit(Mat(2, 1), Vec(3)), PreconditionError);
}

TEST(Fit, LikelihoodBeatsRandomProbes) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Mat X = random_points(rng, 25, 3);
    Vec y(25);
    for (int i = 0; i < 25; ++i) y[i] = std::sin(4 * X(i, 0)) + X(i, 1) * X(i, 2);
    FitOptions options;
    options.seed = static_cast<std::uint64_t>(trial);
    const auto gp = fit(X, y, options);
    const double fitted = profile_log_likelihood(X, y, gp.kernel().lengthscales);
    EXPECT_NEAR(gp.log_marginal_likelihood(), fitted, 1e-6 * std::abs(fitted) + 1e-8);
    std::uniform_real_distribution<double> log_l(std::log(0.05), std::log(10.0));
    for (int probe = 0; probe < 20; ++probe) {
      const Vec l = Vec::NullaryExpr(3, [&] { return std::exp(log_l(rng)); });
      EXPECT_GE(fitted, profile_log_likelihood(X, y, l));
    }
  }
}

TEST(Fit, RecoversLengthscaleOfSimulatedProcess) {
  const KernelSpec truth{Vec{{0.3, 0.3}}, 2.0};
  std::vector<double> first, second;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const Mat X = random_points(rng, 60, 2);
    const Vec y = sample_gp(truth, X, rng);
    FitOptions options;
    options.seed = static_cast<std::uint64_t>(seed);
    const auto gp = fit(X, y, options);
    first.push_back(std::log(gp.kernel().lengthscales[0]));
    second.push_back(std::log(gp.kernel().lengthscales[1]));
  }
  EXPECT_NEAR(stats::median(first), std::log(0.3), 0.5);
  EXPECT_NEAR(stats::median(second), std::log(0.3), 0.5);
}

TEST(Predict, InterpolatesTrainingData) {
  std::mt19937_64 rng(5);
  const auto gp = oracle::random_gp(rng, 20, 3);
  const auto pred = predict(gp, gp.inputs());
  for (int i = 0; i < gp.size(); ++i) {
    EXPECT_NEAR(pred.mean[i], gp.outputs()[i], 1e-6 * (1 + std::abs(gp.outputs()[i])));
    EXPECT_LE(pred.cov(i, i), std::max(gp.nugget(), kJitterStart * gp.kernel().variance) + 1e-12);
    EXPECT_NEAR(gp.mean(gp.inputs().row(i).transpose()), pred.mean[i], 1e-10);
  }
}

TEST(Predict, RevertsToPriorFarAway) {
  std::mt19937_64 rng(6);
  const auto gp = oracle::random_gp(rng, 15, 2);
  const Vec far{{80.0, -60.0}};
  EXPECT_NEAR(gp.mean(far), gp.trend(), 1e-10);
  EXPECT_NEAR(gp.variance(far), gp.kernel().variance, 1e-10);
}

TEST(Predict, PriorGp) {
  const auto gp = GpPosterior::prior(KernelSpec{Vec{{0.5, 0.5}}, 2.0}, 1.5, 2);
  EXPECT_EQ(gp.size(), 0);
  EXPECT_DOUBLE_EQ(gp.mean(Vec{{0.2, 0.3}}), 1.5);
  EXPECT_DOUBLE_EQ(gp.variance(Vec{{0.2, 0.3}}), 2.0);
}

TEST(Predict, CovarianceSymmetricPsd) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gp = oracle::random_gp(rng, 5 + trial, 3);
    const Mat P = random_points(rng, 10 + 2 * trial, 3);
    const auto pred = predict(gp, P);
    EXPECT_EQ(pred.cov, pred.cov.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat> eig(pred.cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * gp.kernel().variance);
    for (int i = 0; i < P.rows(); ++i) EXPECT_NEAR(pred.cov(i, i), gp.variance(P.row(i).transpose()), 1e-10);
  }
}

TEST(OneStep, VanishesAtNewPoint) {
  std::mt19937_64 rng(8);
  const auto gp = oracle::random_gp(rng, 12, 2);
  const Vec c{{0.33, 0.77}};
  const auto up = one_step_update(gp, c);
  // Exactly zero up to the nugget the update carries.
  EXPECT_LE(up.variance(c), 1.01 * gp.nugget());
  EXPECT_NEAR(up.mean_coefficient(c), 1.0, 1e-6);
}

TEST(OneStep, FarPointUnchanged) {
  std::mt19937_64 rng(9);
  const auto gp = oracle::random_gp(rng, 12, 2);
  const auto up = one_step_update(gp, Vec{{0.5, 0.5}});
  const Vec far{{40.0, 40.0}};
  EXPECT_NEAR(up.variance(far), gp.variance(far), 1e-10);
  EXPECT_NEAR(up.mean_coefficient(far), 0.0, 1e-10);
}

TEST(OneStep, NeverIncreasesVariance) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gp = oracle::random_gp(rng, 10, 3);
    const auto up = one_step_update(gp, oracle::uniform_point(rng, 3));
    for (int k = 0; k < 50; ++k) {
      const Vec p = oracle::uniform_point(rng, 3);
      EXPECT_LE(up.variance(p), gp.variance(p) + 1e-15);
      EXPECT_GE(up.variance(p), 0.0);
    }
  }
}

TEST(OneStep, MatchesFullReconditioning) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + 2 * trial, dim = 2 + trial % 3;
    const auto gp = oracle::random_gp(rng, n, dim);
    const Vec c = oracle::uniform_point(rng, dim);
    const auto up = one_step_update(gp, c);

    Mat X(n + 1, dim);
    X << gp.inputs(), c.transpose();
    auto refit = [&](double yc) {
      Vec y(n + 1);
      y << gp.outputs(), yc;
      return GpPosterior::condition(gp.kernel(), X, y, gp.trend(), gp.jitter());
    };
    const auto g0 = refit(0.0), g1 = refit(1.0);
    for (int k = 0; k < 10; ++k) {
      const Vec p = oracle::uniform_point(rng, dim), q = oracle::uniform_point(rng, dim);
      const double s2 = gp.kernel().variance;
      EXPECT_NEAR(up.variance(p), g0.variance(p), 1e-8 * std::max(g0.variance(p), s2));
      EXPECT_NEAR(up.covariance(p, q), g0.covariance(p, q), 1e-8 * s2);
      const double coef = g1.mean(p) - g0.mean(p);
      EXPECT_NEAR(up.mean_coefficient(p), coef, 1e-8 * std::max(std::abs(coef), 1.0));
      // Mean after observing y_c is m(p) + coef (y_c - m(c)).
      EXPECT_NEAR(gp.mean(p) + up.mean_coefficient(p) * (1.0 - gp.mean(c)), g1.mean(p),
                  1e-8 * (1.0 + std::abs(g1.mean(p))));
    }
  }
}

TEST(OneStep, DegenerateAtTrainingInput) {
  std::mt19937_64 rng(12);
  const auto gp = oracle::random_gp(rng, 8, 2);
  EXPECT_THROW(one_step_update(gp, gp.inputs().row(3).transpose()), DegeneratePointError);
}

TEST(Simulate, MeansAndCovarianceConverge) {
  const auto p = analytical_benchmark();
  std::mt19937_64 rng(13);
  const auto gp = oracle::random_gp(rng, 15, 4);
  const auto crn = make_crn(p, 10, 4000, 21);
  const Vec x{{0.4, 0.6}};
  const auto traj = simulate_joint(gp, x, crn);
  ASSERT_EQ(traj.values.rows(), 4000);
  ASSERT_EQ(traj.values.cols(), 10);

  Mat pts(10, 4);
  for (int j = 0; j < 10; ++j) pts.row(j) << x.transpose(), crn.u_unit().row(j);
  const auto pred = predict(gp, pts);
  const double N = 4000.0;
  const Vec col_mean = traj.values.colwise().mean().transpose();
  for (int j = 0; j < 10; ++j)
    EXPECT_NEAR(col_mean[j], pred.mean[j], 3.0 * std::sqrt(pred.cov(j, j) / N) + 1e-12);
  const Mat centred = traj.values.rowwise() - col_mean.transpose();
  const Mat sample_cov = centred.transpose() * centred / (N - 1);
  EXPECT_LT((sample_cov - pred.cov).norm(), 5.0 * pred.cov.norm() / std::sqrt(N));
  EXPECT_LT((traj.mean - pred.mean).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Simulate, ObservedSliceCollapsesOnMean) {
  const auto p = analytical_benchmark();
  const auto crn = make_crn(p, 12, 200, 3);
  const Vec x{{0.25, 0.8}};
  Mat X(12, 4);
  Vec y(12);
  for (int j = 0; j < 12; ++j) {
    X.row(j) << x.transpose(), crn.u_unit().row(j);
    y[j] = std::sin(3 * crn.u_unit()(j, 0)) + crn.u_unit()(j, 1);
  }
  const auto gp = GpPosterior::condition(KernelSpec{Vec::Constant(4, 0.5), 1.0}, X, y);
  const auto traj = simulate_joint(gp, x, crn);
  const double sd_floor = std::sqrt(gp.nugget());
  for (int k = 0; k < traj.values.rows(); ++k)
    for (int j = 0; j < 12; ++j) EXPECT_NEAR(traj.values(k, j), y[j], 10 * sd_floor + 1e-8);
}

TEST(Simulate, Deterministic) {
  const auto p = analytical_benchmark();
  std::mt19937_64 rng(14);
  const auto gp = oracle::random_gp(rng, 10, 4);
  const auto crn = make_crn(p, 30, 50, 5);
  const auto a = simulate_joint(gp, Vec{{0.1, 0.9}}, crn), b = simulate_joint(gp, Vec{{0.1, 0.9}}, crn);
  EXPECT_EQ(a.values, b.values);
}

TEST(Simulate, SliceModelMatchesDirectComputation) {
  const auto p = analytical_benchmark();
  std::mt19937_64 rng(15);
  auto gp = std::make_shared<const GpPosterior>(oracle::random_gp(rng, 18, 4));
  const auto crn = make_crn(p, 25, 10, 1);
  const SliceModel model(gp, crn.u_unit());
  const Vec x{{0.6, 0.2}};
  const auto slice = model.at(x);
  for (int j = 0; j < 25; ++j) {
    const Vec q = slice.points.row(j).transpose();
    EXPECT_NEAR(slice.mean[j], gp->mean(q), 1e-10);
    EXPECT_NEAR(slice.variance[j], gp->variance(q), 1e-10);
  }
}

TEST(WriteModel, EmitsJson) {
  std::mt19937_64 rng(16);
  const auto gp = oracle::random_gp(rng, 6, 2);
  const auto path = std::filesystem::temp_directory_path() / "ccbo_model_test.json";
  write_model(gp, path);
  std::ifstream in(path);
  const auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc.at("lengthscales").size(), 2u);
  EXPECT_NEAR(doc.at("variance").get<double>(), gp.kernel().variance, 1e-12 * gp.kernel().variance);
  std::filesystem::remove(path);
}
