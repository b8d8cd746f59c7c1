#include "linear_program.hpp"

#include <cmath>
#include <vector>

namespace ccbo::detail {

namespace {

constexpr double kEps = 1e-11;

class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) : m_(A.rows()), n_(A.cols()) {
    Eigen::Index artificials = 0;
    for (Eigen::Index i = 0; i < m_; ++i) artificials += b[i] < 0.0 ? 1 : 0;
    art_begin_ = n_ + m_;
    cols_ = art_begin_ + artificials;
    t_ = Eigen::MatrixXd::Zero(m_ + 1, cols_ + 1);
    basis_.resize(static_cast<std::size_t>(m_));

    Eigen::Index next_art = art_begin_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double sign = b[i] < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign * A.row(i);
      t_(i, n_ + i) = sign;
      t_(i, cols_) = sign * b[i];
      if (sign < 0.0) {
        t_(i, next_art) = 1.0;
        basis_[static_cast<std::size_t>(i)] = next_art++;
      } else {
        basis_[static_cast<std::size_t>(i)] = n_ + i;
      }
    }
  }

  bool has_artificials() const { return cols_ > art_begin_; }

  // Phase 1: maximize -sum(artificials). Returns false when infeasible.
  bool phase_one() {
    if (!has_artificials()) return true;
    set_objective(Eigen::VectorXd::Zero(cols_), /*artificial_cost=*/-1.0);
    if (!iterate(cols_)) return false;
    const double scale = 1.0 + t_.col(cols_).head(m_).cwiseAbs().maxCoeff();
    if (t_(m_, cols_) < -1e-9 * scale) return false;
    // Drive zero-level artificials out of the basis where possible.
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < art_begin_) continue;
      for (Eigen::Index j = 0; j < art_begin_; ++j) {
        if (std::abs(t_(i, j)) > kEps) {
          pivot(i, j);
          break;
        }
      }
    }
    return true;
  }

  // Phase 2 on the original costs; artificial columns may not re-enter.
  bool phase_two(const Eigen::VectorXd& c) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(cols_);
    full.head(n_) = c;
    set_objective(full, 0.0);
    return iterate(art_begin_);
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
      if (j < n_) x[j] = t_(i, cols_);
    }
    return x;
  }

 private:
  void set_objective(const Eigen::VectorXd& cost, double artificial_cost) {
    // Row m holds z_j - c_j; rhs holds the objective value.
    t_.row(m_).setZero();
    for (Eigen::Index j = 0; j < cols_; ++j) t_(m_, j) = -(j >= art_begin_ ? artificial_cost : cost[j]);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double coef = t_(m_, basis_[static_cast<std::size_t>(i)]);
      if (coef != 0.0) t_.row(m_) -= coef * t_.row(i);
    }
  }

  bool iterate(Eigen::Index allowed_cols) {
    const int max_pivots = 50 * static_cast<int>(m_ + cols_ + 1);
    for (int it = 0; it < max_pivots; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (t_(m_, j) < -kEps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (t_(i, enter) <= kEps) continue;
        const double ratio = t_(i, cols_) / t_(i, enter);
        if (leave < 0 || ratio < best - kEps ||
            (std::abs(ratio - best) <= kEps &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    return true;
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::Index m_;
  Eigen::Index n_;
  Eigen::Index art_begin_ = 0;
  Eigen::Index cols_ = 0;
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  Tableau tableau(A, b);
  LpResult result;
  if (!tableau.phase_one()) {
    result.status = LpStatus::infeasible;
    return result;
  }
  if (!tableau.phase_two(c)) {
    result.status = LpStatus::unbounded;
    return result;
  }
  result.status = LpStatus::optimal;
  result.x = tableau.solution();
  result.value = c.dot(result.x);
  return result;
}

}  // namespace ccbo::detail
