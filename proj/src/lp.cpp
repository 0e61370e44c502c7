#include "rpimon/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rpimon::lp {
namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-10;
constexpr int kMaxPivots = 50000;
constexpr int kBlandAfter = 40;

// Dense tableau for  min cost^T w  s.t.  T w = rhs, w >= 0, where the last
// `rows` columns are artificial variables forming the initial basis.
class Tableau {
 public:
  Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& c)
      : rows_(static_cast<int>(A.cols())),
        ycols_(static_cast<int>(A.rows())),
        cols_(ycols_ + rows_),
        t_(rows_, cols_ + 1),
        sign_(rows_),
        basis_(rows_) {
    t_.setZero();
    for (int i = 0; i < rows_; ++i) {
      sign_[i] = c[i] < 0.0 ? -1.0 : 1.0;
      for (int j = 0; j < ycols_; ++j) t_(i, j) = sign_[i] * A(j, i);
      t_(i, ycols_ + i) = 1.0;
      t_(i, cols_) = sign_[i] * c[i];
      basis_[i] = ycols_ + i;
    }
  }

  // Returns false when the objective is unbounded below.
  bool run(const std::vector<double>& cost, bool allow_artificial) {
    int degenerate = 0;
    for (int iter = 0; iter < kMaxPivots; ++iter) {
      const int limit = allow_artificial ? cols_ : ycols_;
      const bool bland = degenerate > kBlandAfter;
      int enter = -1;
      double best = -kCostEps;
      for (int j = 0; j < limit; ++j) {
        double d = cost[j];
        for (int i = 0; i < rows_; ++i) d -= cost[basis_[i]] * t_(i, j);
        if (d < best) {
          enter = j;
          if (bland) break;
          best = d;
        }
      }
      if (enter < 0) return true;

      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotEps) continue;
        const double r = t_(i, cols_) / a;
        if (r < ratio - 1e-13 ||
            (r <= ratio + 1e-13 && leave >= 0 && basis_[i] < basis_[leave])) {
          ratio = r;
          leave = i;
        }
      }
      if (leave < 0) return false;
      degenerate = ratio <= 1e-13 ? degenerate + 1 : 0;
      pivot(leave, enter);
    }
    throw std::runtime_error("lp: pivot limit exceeded");
  }

  void pivot(int r, int c) {
    const double p = t_(r, c);
    t_.row(r) /= p;
    for (int i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[r] = c;
  }

  // Pivot basic artificials out wherever a structural column allows it.
  void purge_artificials() {
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < ycols_) continue;
      int best = -1;
      double mag = 1e-9;
      for (int j = 0; j < ycols_; ++j) {
        if (std::abs(t_(i, j)) > mag) {
          mag = std::abs(t_(i, j));
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

  double objective(const std::vector<double>& cost) const {
    double v = 0.0;
    for (int i = 0; i < rows_; ++i) v += cost[basis_[i]] * t_(i, cols_);
    return v;
  }

  // Simplex multipliers of the equality rows, mapped back to the unflipped
  // system. These are the primal variables.
  Eigen::VectorXd multipliers(const std::vector<double>& cost) const {
    Eigen::VectorXd x(rows_);
    for (int k = 0; k < rows_; ++k) {
      double pi = 0.0;
      for (int i = 0; i < rows_; ++i) pi += cost[basis_[i]] * t_(i, ycols_ + k);
      x[k] = sign_[k] * pi;
    }
    return x;
  }

  int ycols() const { return ycols_; }
  int cols() const { return cols_; }

 private:
  int rows_;
  int ycols_;
  int cols_;
  Eigen::MatrixXd t_;
  std::vector<double> sign_;
  std::vector<int> basis_;
};

Result solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
             const Eigen::VectorXd& c, bool& dual_infeasible) {
  dual_infeasible = false;
  Tableau tab(A, c);
  const int m = tab.ycols();

  std::vector<double> phase1(tab.cols(), 0.0);
  for (int j = m; j < tab.cols(); ++j) phase1[j] = 1.0;
  tab.run(phase1, true);
  const double scale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  if (tab.objective(phase1) > 1e-9 * scale) {
    dual_infeasible = true;
    return {};
  }
  tab.purge_artificials();

  std::vector<double> phase2(tab.cols(), 0.0);
  for (int j = 0; j < m; ++j) phase2[j] = b[j];
  Result res;
  if (!tab.run(phase2, false)) {
    res.status = Status::infeasible;
    return res;
  }
  res.status = Status::optimal;
  res.x = tab.multipliers(phase2);
  res.value = c.dot(res.x);
  return res;
}

}  // namespace

Result maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& c) {
  if (A.rows() != b.size() || A.cols() != c.size())
    throw std::invalid_argument("lp: dimension mismatch");
  if (A.rows() == 0) {
    Result r;
    r.x = Eigen::VectorXd::Zero(c.size());
    r.status = c.isZero(0.0) ? Status::optimal : Status::unbounded;
    return r;
  }
  bool dual_infeasible = false;
  Result r = solve(A, b, c, dual_infeasible);
  if (!dual_infeasible) return r;
  // Dual infeasible: the primal is either unbounded or infeasible.
  Result feas = feasible_point(A, b);
  if (feas.status == Status::optimal) feas.status = Status::unbounded;
  return feas;
}

Result feasible_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(A.cols());
  if (A.rows() == 0) return {Status::optimal, zero, 0.0};
  bool dual_infeasible = false;
  Result r = solve(A, b, zero, dual_infeasible);
  return r;
}

}  // namespace rpimon::lp
