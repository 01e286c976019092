#pragma once

// Small dense two-phase simplex, sized for constraint systems of a few dozen rows.
// Only used to decide strict feasibility of {E x = e, A x > b}.

#include <cmath>
#include <limits>
#include <vector>

#include "cbf/linalg.hpp"

namespace cbf::lp {

inline constexpr double kFeasibilityTolerance = 1e-9;

namespace detail {

/// Tableau simplex for: maximize c^T z s.t. M z = rhs (rhs >= 0), z >= 0.
/// Bland's rule; returns false when phase I cannot reach feasibility.
class Simplex {
 public:
  Simplex(const Matrix& m, const Vector& rhs, const Vector& c) : rows_(m.rows()), cols_(m.cols()) {
    // Columns: original | artificials | rhs
    t_ = Matrix::Zero(rows_ + 1, cols_ + rows_ + 1);
    t_.topLeftCorner(rows_, cols_) = m;
    t_.block(0, cols_, rows_, rows_) = Matrix::Identity(rows_, rows_);
    t_.col(cols_ + rows_).head(rows_) = rhs;
    basis_.resize(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) basis_[i] = cols_ + i;
    objective_ = c;
  }

  /// Returns the optimum, -inf when infeasible, +inf when unbounded.
  double solve() {
    const Eigen::Index rhs_col = cols_ + rows_;
    // Phase I: minimise sum of artificials == maximise -sum.
    Vector phase1 = Vector::Zero(cols_ + rows_);
    phase1.segment(cols_, rows_).setConstant(-1.0);
    set_objective(phase1);
    if (!iterate(cols_ + rows_)) return std::numeric_limits<double>::infinity();
    if (t_(rows_, rhs_col) < -1e-9) return -std::numeric_limits<double>::infinity();
    // Drive remaining artificials out of the basis where possible.
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[i] < cols_) continue;
      for (Eigen::Index j = 0; j < cols_; ++j) {
        if (std::abs(t_(i, j)) > 1e-11) {
          pivot(i, j);
          break;
        }
      }
    }
    Vector phase2 = Vector::Zero(cols_ + rows_);
    phase2.head(cols_) = objective_;
    set_objective(phase2);
    if (!iterate(cols_)) return std::numeric_limits<double>::infinity();
    return t_(rows_, rhs_col);
  }

 private:
  void set_objective(const Vector& c) {
    t_.row(rows_).setZero();
    t_.row(rows_).head(cols_ + rows_) = -c.transpose();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = c(basis_[i]);
      if (cb != 0.0) t_.row(rows_) += cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
    }
    basis_[r] = c;
  }

  // Columns >= allowed never enter the basis.
  bool iterate(Eigen::Index allowed) {
    const Eigen::Index rhs_col = cols_ + rows_;
    for (int guard = 0; guard < 10000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (t_(rows_, j) < -1e-11) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        if (t_(i, enter) > 1e-11) {
          const double ratio = t_(i, rhs_col) / t_(i, enter);
          if (ratio < best - 1e-14 || (leave >= 0 && std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }

  Eigen::Index rows_, cols_;
  Matrix t_;
  std::vector<Eigen::Index> basis_;
  Vector objective_;
};

}  // namespace detail

/// Largest common margin t in [0, 1] with E x = e and a_i^T x - b_i >= t for every
/// (unit-normalised) row of A. Returns -inf when even t = 0 is infeasible.
inline double max_margin(const Matrix& eq, const Vector& eq_rhs, const Matrix& ineq, const Vector& ineq_rhs) {
  const Eigen::Index n = std::max(eq.cols(), ineq.cols());
  const Eigen::Index me = eq.rows();
  const Eigen::Index mi = ineq.rows();
  // Variables: x+ (n), x- (n), t, surplus (mi), slack for t <= 1.
  const Eigen::Index nv = 2 * n + 1 + mi + 1;
  const Eigen::Index m = me + mi + 1;
  Matrix lhs = Matrix::Zero(m, nv);
  Vector rhs(m);
  for (Eigen::Index i = 0; i < me; ++i) {
    lhs.block(i, 0, 1, n) = eq.row(i);
    lhs.block(i, n, 1, n) = -eq.row(i);
    rhs(i) = eq_rhs(i);
  }
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double norm = ineq.row(i).norm();
    const double s = norm > 0 ? 1.0 / norm : 1.0;
    const Eigen::Index r = me + i;
    lhs.block(r, 0, 1, n) = s * ineq.row(i);
    lhs.block(r, n, 1, n) = -s * ineq.row(i);
    lhs(r, 2 * n) = -1.0;
    lhs(r, 2 * n + 1 + i) = -1.0;
    rhs(r) = s * ineq_rhs(i);
  }
  lhs(m - 1, 2 * n) = 1.0;
  lhs(m - 1, nv - 1) = 1.0;
  rhs(m - 1) = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (rhs(i) < 0) {
      lhs.row(i) *= -1.0;
      rhs(i) *= -1.0;
    }
  }
  Vector c = Vector::Zero(nv);
  c(2 * n) = 1.0;
  detail::Simplex sx(lhs, rhs, c);
  return sx.solve();
}

/// True when {E x = e, A x > b} has an interior point (margin above tolerance).
inline bool strictly_feasible(const Matrix& eq, const Vector& eq_rhs, const Matrix& ineq, const Vector& ineq_rhs,
                              double tol = kFeasibilityTolerance) {
  if (ineq.rows() == 0) {
    return max_margin(eq, eq_rhs, Matrix(0, eq.cols()), Vector(0)) > -std::numeric_limits<double>::infinity();
  }
  return max_margin(eq, eq_rhs, ineq, ineq_rhs) > tol;
}

}  // namespace cbf::lp
