#include "ccbo/quasirandom.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "ccbo/errors.hpp"

namespace ccbo {

namespace {

constexpr int kBits = 32;

struct Primitive {
  unsigned poly;  // full polynomial, leading and constant terms included
  int degree;
  std::array<unsigned, 9> m;  // initial direction integers
};

// Joe-Kuo primitive polynomials and initial direction numbers; row k is
// dimension k + 2 (dimension 1 is the van der Corput sequence).
constexpr Primitive kTable[] = {
    {3, 1, {1}},
    {7, 2, {1, 3}},
    {11, 3, {1, 3, 1}},
    {13, 3, {1, 1, 1}},
    {19, 4, {1, 1, 3, 3}},
    {25, 4, {1, 3, 5, 13}},
    {37, 5, {1, 1, 5, 5, 17}},
    {41, 5, {1, 1, 5, 5, 5}},
    {47, 5, {1, 1, 7, 11, 19}},
    {55, 5, {1, 1, 5, 1, 1}},
    {59, 5, {1, 1, 1, 3, 11}},
    {61, 5, {1, 3, 5, 5, 31}},
    {67, 6, {1, 3, 3, 9, 7, 49}},
    {91, 6, {1, 1, 1, 15, 21, 21}},
    {97, 6, {1, 3, 1, 13, 27, 49}},
    {103, 6, {1, 1, 1, 15, 7, 5}},
    {109, 6, {1, 3, 1, 15, 13, 25}},
    {115, 6, {1, 1, 5, 5, 19, 61}},
    {131, 7, {1, 3, 7, 11, 23, 15, 103}},
    {137, 7, {1, 3, 7, 13, 13, 15, 69}},
    {143, 7, {1, 1, 3, 13, 7, 35, 63}},
    {145, 7, {1, 3, 5, 9, 1, 25, 53}},
    {157, 7, {1, 3, 1, 13, 9, 35, 107}},
    {167, 7, {1, 3, 1, 5, 27, 61, 31}},
    {171, 7, {1, 1, 5, 11, 19, 41, 61}},
    {185, 7, {1, 3, 5, 3, 3, 13, 69}},
    {191, 7, {1, 1, 7, 13, 1, 19, 1}},
    {193, 7, {1, 3, 7, 5, 13, 19, 59}},
    {203, 7, {1, 1, 3, 9, 25, 29, 41}},
    {211, 7, {1, 3, 5, 13, 23, 1, 55}},
    {213, 7, {1, 3, 7, 3, 13, 59, 17}},
    {229, 7, {1, 3, 1, 3, 5, 53, 69}},
    {239, 7, {1, 1, 5, 5, 23, 33, 13}},
    {241, 7, {1, 1, 7, 7, 1, 61, 123}},
    {247, 7, {1, 1, 7, 9, 13, 61, 49}},
    {253, 7, {1, 3, 3, 5, 3, 55, 33}},
    {285, 8, {1, 3, 1, 15, 31, 13, 49, 245}},
    {299, 8, {1, 3, 5, 15, 31, 59, 63, 97}},
    {301, 8, {1, 3, 1, 11, 11, 11, 77, 249}},
    {333, 8, {1, 3, 1, 11, 27, 43, 71, 9}},
    {351, 8, {1, 1, 7, 15, 21, 11, 81, 45}},
    {355, 8, {1, 3, 7, 3, 25, 31, 65, 79}},
    {357, 8, {1, 3, 1, 1, 19, 11, 3, 205}},
    {361, 8, {1, 1, 5, 9, 19, 21, 29, 157}},
    {369, 8, {1, 3, 7, 11, 1, 33, 89, 185}},
    {391, 8, {1, 3, 3, 3, 15, 9, 79, 71}},
    {397, 8, {1, 3, 7, 11, 15, 39, 119, 27}},
    {425, 8, {1, 1, 3, 1, 11, 31, 97, 225}},
    {451, 8, {1, 1, 1, 3, 23, 43, 57, 177}},
    {463, 8, {1, 3, 7, 7, 17, 17, 37, 71}},
    {487, 8, {1, 3, 1, 5, 27, 63, 123, 213}},
    {501, 8, {1, 1, 3, 5, 11, 43, 53, 133}},
    {529, 9, {1, 3, 5, 5, 29, 17, 47, 173, 479}},
    {539, 9, {1, 3, 3, 11, 3, 1, 109, 9, 69}},
    {545, 9, {1, 1, 1, 5, 17, 39, 23, 5, 343}},
    {557, 9, {1, 3, 1, 5, 25, 15, 31, 103, 499}},
    {563, 9, {1, 1, 1, 11, 11, 17, 63, 105, 183}},
    {601, 9, {1, 1, 5, 11, 9, 29, 97, 231, 363}},
    {607, 9, {1, 1, 5, 15, 19, 45, 41, 7, 383}},
    {617, 9, {1, 3, 7, 7, 31, 19, 83, 137, 221}},
    {623, 9, {1, 1, 1, 3, 23, 15, 111, 223, 83}},
    {631, 9, {1, 1, 5, 13, 31, 15, 55, 25, 161}},
    {637, 9, {1, 1, 3, 13, 25, 47, 39, 87, 257}},};

using Directions = std::array<std::uint32_t, kBits>;

Directions directions(int dim_index) {
  Directions v{};
  if (dim_index == 0) {
    for (int k = 0; k < kBits; ++k) v[k] = 1u << (kBits - 1 - k);
    return v;
  }
  const Primitive& p = kTable[dim_index - 1];
  const int s = p.degree;
  std::array<std::uint32_t, kBits> m{};
  for (int k = 0; k < s; ++k) m[k] = p.m[k];
  for (int k = s; k < kBits; ++k) {
    std::uint32_t value = m[k - s] ^ (m[k - s] << s);
    for (int j = 1; j < s; ++j)
      if ((p.poly >> (s - j)) & 1u) value ^= m[k - j] << j;
    m[k] = value;
  }
  for (int k = 0; k < kBits; ++k) v[k] = m[k] << (kBits - 1 - k);
  return v;
}

}  // namespace

int sobol_max_dimension() { return static_cast<int>(std::size(kTable)) + 1; }

std::vector<Vec> sobol_sequence(int dim, int count, int skip) {
  if (dim < 1) throw PreconditionError("Sobol dimension must be positive");
  if (dim > sobol_max_dimension())
    throw ConfigError(fmt::format("Sobol dimension {} exceeds the supported maximum {}", dim,
                                  sobol_max_dimension()));
  if (count < 0 || skip < 0) throw PreconditionError("Sobol count and skip must be nonnegative");

  std::vector<Directions> v;
  v.reserve(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) v.push_back(directions(j));

  std::vector<std::uint32_t> state(static_cast<std::size_t>(dim), 0);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  constexpr double scale = 1.0 / 4294967296.0;
  const std::uint64_t total = static_cast<std::uint64_t>(skip) + static_cast<std::uint64_t>(count);
  for (std::uint64_t i = 0; i < total; ++i) {
    if (i >= static_cast<std::uint64_t>(skip)) {
      Vec point(dim);
      for (int j = 0; j < dim; ++j) point[j] = state[j] * scale;
      out.push_back(std::move(point));
    }
    // Gray-code step: flip the direction number at the lowest zero bit of i.
    const int c = std::countr_one(i);
    if (c >= kBits) throw PreconditionError("Sobol sequence length exceeds 2^32");
    for (int j = 0; j < dim; ++j) state[j] ^= v[j][c];
  }
  return out;
}

Mat sobol_matrix(int dim, int count, int skip) {
  const auto points = sobol_sequence(dim, count, skip);
  Mat out(count, dim);
  for (int i = 0; i < count; ++i) out.row(i) = points[i].transpose();
  return out;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

LhsDesign latin_hypercube(int dim, int size, std::uint64_t seed) {
  if (dim < 1 || size < 1) throw PreconditionError("Latin hypercube needs dim >= 1 and size >= 1");
  std::mt19937_64 rng(seed);
  LhsDesign design;
  design.points.assign(static_cast<std::size_t>(size), Vec(dim));
  std::vector<int> perm(static_cast<std::size_t>(size));
  for (int j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with our own uniform so the design is stable across
    // standard library implementations.
    for (int i = size - 1; i > 0; --i) {
      const auto k = static_cast<int>(unit_uniform(rng) * (i + 1));
      std::swap(perm[i], perm[std::min(k, i)]);
    }
    for (int i = 0; i < size; ++i) {
      double value = (perm[i] + unit_uniform(rng)) / size;
      design.points[i][j] = std::min(value, std::nextafter(static_cast<double>(perm[i] + 1) / size, 0.0));
    }
  }
  return design;
}

CrnSet::CrnSet(Mat u_points, Mat u_unit, std::vector<Mat> normal_blocks, std::uint64_t seed)
    : u_points_(std::move(u_points)),
      u_unit_(std::move(u_unit)),
      normal_blocks_(std::move(normal_blocks)),
      seed_(seed) {}

namespace {

std::vector<Mat> normal_blocks(int blocks, int N, int M, std::mt19937_64& rng) {
  // Box-Muller on our own uniforms: std::normal_distribution is not
  // reproducible across standard libraries.
  std::vector<Mat> out;
  for (int b = 0; b < blocks; ++b) {
    Mat block(N, M);
    for (Eigen::Index k = 0; k < block.size(); k += 2) {
      const double r = std::sqrt(-2.0 * std::log1p(-unit_uniform(rng)));
      const double theta = 2.0 * 3.14159265358979323846 * unit_uniform(rng);
      block.data()[k] = r * std::cos(theta);
      if (k + 1 < block.size()) block.data()[k + 1] = r * std::sin(theta);
    }
    out.push_back(std::move(block));
  }
  return out;
}

CrnSet assemble(const ProblemSpec& problem, Mat unit, int N, std::uint64_t seed, std::mt19937_64& rng) {
  const int M = static_cast<int>(unit.rows());
  Mat raw(M, problem.dim_u());
  for (int j = 0; j < M; ++j) raw.row(j) = problem.dist_u().inverse_cdf(unit.row(j).transpose()).transpose();
  Mat normalized(M, problem.dim_u());
  for (int j = 0; j < M; ++j) normalized.row(j) = problem.normalize_u(raw.row(j).transpose()).transpose();
  return CrnSet(std::move(raw), std::move(normalized),
                normal_blocks(problem.num_constraints(), N, M, rng), seed);
}

void check_sizes(int M, int N) {
  if (M < 1 || N < 1) throw PreconditionError("CRN sizes M and N must be positive");
}

}  // namespace

CrnSet make_crn(const ProblemSpec& problem, int M, int N, std::uint64_t seed) {
  check_sizes(M, N);
  std::mt19937_64 rng(seed);
  return assemble(problem, sobol_matrix(problem.dim_u(), M), N, seed, rng);
}

CrnSet make_random_crn(const ProblemSpec& problem, int M, int N, std::uint64_t seed) {
  check_sizes(M, N);
  std::mt19937_64 rng(seed);
  Mat unit(M, problem.dim_u());
  for (Eigen::Index k = 0; k < unit.size(); ++k) unit.data()[k] = unit_uniform(rng);
  return assemble(problem, std::move(unit), N, seed, rng);
}

void write_crn_csv(const CrnSet& crn, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  const Mat& u = crn.u_points();
  out << "j";
  for (Eigen::Index c = 0; c < u.cols(); ++c) out << ",u" << c + 1;
  const int shown = crn.N();
  for (int k = 0; k < shown; ++k) out << ",z" << k + 1;
  out << '\n';
  for (Eigen::Index j = 0; j < u.rows(); ++j) {
    out << j;
    for (Eigen::Index c = 0; c < u.cols(); ++c) out << fmt::format(",{:.17g}", u(j, c));
    for (int k = 0; k < shown; ++k) out << fmt::format(",{:.17g}", crn.normal_block(0)(k, j));
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace ccbo
