#pragma once

#include <Eigen/Dense>

namespace ccbo::detail {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double value = 0.0;
};

// maximize c'x  subject to  A x <= b,  x >= 0  (b of any sign).
// Dense two-phase tableau simplex with Bland's rule; meant for the handful
// of variables and rows of a trust-region step.
LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace ccbo::detail
