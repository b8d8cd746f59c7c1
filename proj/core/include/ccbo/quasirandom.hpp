#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "ccbo/problem.hpp"

namespace ccbo {

/// Highest dimension covered by the built-in direction-number table.
int sobol_max_dimension();

/// Sobol points in Gray-code order (Joe-Kuo direction numbers, 32-bit).
/// Point 0 is the origin; `skip` drops that many leading points.
/// Throws ConfigError when dim exceeds sobol_max_dimension().
std::vector<Vec> sobol_sequence(int dim, int count, int skip = 1);

/// Sobol points as rows of a count x dim matrix.
Mat sobol_matrix(int dim, int count, int skip = 1);

/// One point per axis-aligned stratum in every coordinate.
struct LhsDesign {
  std::vector<Vec> points;
  int size() const { return static_cast<int>(points.size()); }
};

LhsDesign latin_hypercube(int dim, int size, std::uint64_t seed);

/// Uniform double in [0,1) from the top 53 bits of a 64-bit draw.
double unit_uniform(std::mt19937_64& rng);

/// Common random numbers shared by every estimator of one run.
///
/// `u_points` holds M uncertainty vectors (raw coordinates, one per row) and
/// `u_unit` the same points normalized to [0,1]. One N x M standard-normal
/// block is held per constraint so that constraint trajectories are
/// independent of each other but frozen across iterations.
class CrnSet {
 public:
  CrnSet(Mat u_points, Mat u_unit, std::vector<Mat> normal_blocks,
         std::uint64_t seed);

  int M() const { return static_cast<int>(u_points_.rows()); }
  int N() const {
    return normal_blocks_.empty() ? 0 : static_cast<int>(normal_blocks_[0].rows());
  }
  std::uint64_t seed() const { return seed_; }
  const Mat& u_points() const { return u_points_; }
  const Mat& u_unit() const { return u_unit_; }
  const Mat& normal_block(int block = 0) const { return normal_blocks_.at(block); }
  int num_blocks() const { return static_cast<int>(normal_blocks_.size()); }

 private:
  Mat u_points_;
  Mat u_unit_;
  std::vector<Mat> normal_blocks_;
  std::uint64_t seed_;
};

inline constexpr int kDefaultCrnM = 300;
inline constexpr int kDefaultCrnN = 1000;

/// u-points from the Sobol sequence (first point skipped) mapped through the
/// inverse CDF of the problem distribution; normal blocks drawn from `seed`.
CrnSet make_crn(const ProblemSpec& problem, int M = kDefaultCrnM,
                int N = kDefaultCrnN, std::uint64_t seed = 0);

/// Same layout but with i.i.d. u-points drawn from `seed`. Used for
/// re-estimation with fresh randomness (final-model validation).
CrnSet make_random_crn(const ProblemSpec& problem, int M, int N,
                       std::uint64_t seed);

/// Writes u-points and the first normal block as CSV for audits.
void write_crn_csv(const CrnSet& crn, const std::filesystem::path& path);

}  // namespace ccbo
