#pragma once

#include <Eigen/Dense>

namespace rpimon::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  Eigen::VectorXd x;  // primal point (valid when optimal)
  double value = 0.0; // c^T x at optimum
};

// Maximize c^T x subject to A x <= b with x free.
//
// Solved through the dual (min b^T y, A^T y = c, y >= 0) with a two-phase
// tableau simplex. The tableau has only `n` rows, which keeps pivots cheap for
// the tall, narrow systems produced by polytope operations. Stateless and
// reentrant.
Result maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& c);

// A point satisfying A x <= b, or nullopt-like status infeasible.
Result feasible_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

}  // namespace rpimon::lp
