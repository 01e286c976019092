#pragma once

#include <string>
#include <vector>

#include "cbf/linalg.hpp"

namespace cbf {

/// One hypothesis: R^E theta = r^E and R^O theta > r^O.
struct ConstraintMatrices {
  Matrix RE;
  Vector rE;
  Matrix RO;
  Vector rO;
  std::string text;  // as written by the user (trimmed)

  static ConstraintMatrices empty(Eigen::Index P) {
    return {Matrix(0, P), Vector(0), Matrix(0, P), Vector(0), {}};
  }

  Eigen::Index dimension() const { return std::max(RE.cols(), RO.cols()); }
  Eigen::Index equality_count() const { return RE.rows(); }
  Eigen::Index order_count() const { return RO.rows(); }
  bool has_equalities() const { return RE.rows() > 0; }
  bool has_orders() const { return RO.rows() > 0; }
  bool is_order_only() const { return RE.rows() == 0 && RO.rows() > 0; }

  Matrix stacked() const { return linalg::vstack(RE, RO); }
  Vector stacked_rhs() const { return linalg::vconcat(rE, rO); }

  /// Parameters (column indices) with a nonzero coefficient in any row.
  std::vector<Eigen::Index> involved() const {
    std::vector<Eigen::Index> out;
    const Matrix s = stacked();
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      if (s.rows() && s.col(j).cwiseAbs().maxCoeff() > 0.0) out.push_back(j);
    }
    return out;
  }

  bool satisfied_by(const Vector& theta, double eq_tol = 1e-10) const {
    if (RE.rows() && ((RE * theta - rE).cwiseAbs().array() > eq_tol).any()) return false;
    if (RO.rows() && ((RO * theta - rO).array() <= 0.0).any()) return false;
    return true;
  }

  bool in_order_region(const Vector& theta) const {
    return RO.rows() == 0 || ((RO * theta - rO).array() > 0.0).all();
  }
};

inline bool same_matrices(const ConstraintMatrices& a, const ConstraintMatrices& b, double tol = 0.0) {
  auto eq = [tol](const auto& x, const auto& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    return x.size() == 0 || (x - y).cwiseAbs().maxCoeff() <= tol;
  };
  return eq(a.RE, b.RE) && eq(a.rE, b.rE) && eq(a.RO, b.RO) && eq(a.rO, b.rO);
}

}  // namespace cbf
