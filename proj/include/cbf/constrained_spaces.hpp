#pragma once

#include <optional>

#include "cbf/constraints.hpp"
#include "cbf/errors.hpp"
#include "cbf/linalg.hpp"
#include "cbf/lp.hpp"

namespace cbf {

/// One-to-one reparametrisation [theta_E; theta_O; phi] = T theta with T = [R^E; R^O; D].
///
/// When [R^E; R^O] loses rank the order block is instead expressed in the reduced
/// coordinates xi = Dtilde theta of the equality hyperplane, where the rows of Dtilde
/// are an orthonormal basis of the complement of row(R^E):
///   theta in H  <=>  R^E theta = r^E  and  RO_tilde xi > rO_tilde.
struct Transformation {
  Matrix T;
  Matrix D;
  Matrix D_tilde;    // (P - q^E) x P, orthonormal rows
  Matrix RO_tilde;   // q^O x (P - q^E)
  Vector rO_tilde;   // q^O
  Matrix RE_pinv;    // P x q^E
  bool reduced = false;

  /// xi coordinates of theta on the equality hyperplane.
  Vector reduce(const Vector& theta) const { return D_tilde * theta; }
};

struct BoundaryPoint {
  Vector theta0;
  bool exact = true;  // false when [R^E; R^O] theta = [r^E; r^O] had no solution
};

namespace detail {
inline void check_equalities(const ConstraintMatrices& cm) {
  if (cm.RE.rows() == 0) return;
  const auto rank = linalg::numerical_rank(cm.RE);
  if (rank < cm.RE.rows()) throw HypothesisError("redundant equality constraints");
  Matrix aug(cm.RE.rows(), cm.RE.cols() + 1);
  aug << cm.RE, cm.rE;
  if (linalg::numerical_rank(aug) > rank) throw HypothesisError("infeasible hypothesis");
}
}  // namespace detail

/// Throws HypothesisError when the hypothesis has redundant equalities or describes an
/// empty set (checked by LP with strict order margins).
inline void validate_hypothesis(const ConstraintMatrices& cm) {
  detail::check_equalities(cm);
  if (!lp::strictly_feasible(cm.RE, cm.rE, cm.RO, cm.rO)) {
    throw HypothesisError("infeasible hypothesis" + (cm.text.empty() ? std::string() : ": " + cm.text));
  }
}

inline Transformation build_transformation(const ConstraintMatrices& cm, Eigen::Index P) {
  detail::check_equalities(cm);
  Transformation tr;
  const Matrix stacked = cm.stacked().rows() ? cm.stacked() : Matrix(0, P);
  const Eigen::Index q = stacked.rows();
  const auto rank = linalg::numerical_rank(stacked);
  tr.reduced = rank < q;
  tr.D = linalg::orthogonal_complement_rows(stacked, P);
  if (!tr.reduced) {
    tr.T = linalg::vstack(stacked, tr.D);
  }
  tr.RE_pinv = linalg::pseudo_inverse(cm.RE.rows() ? cm.RE : Matrix(0, P));
  tr.D_tilde = linalg::orthogonal_complement_rows(cm.RE.rows() ? cm.RE : Matrix(0, P), P);
  const Matrix RO = cm.RO.rows() ? cm.RO : Matrix(0, P);
  tr.RO_tilde = RO * tr.D_tilde.transpose();
  tr.rO_tilde = cm.rO.size() ? Vector(cm.rO - RO * tr.RE_pinv * cm.rE) : Vector(0);
  return tr;
}

/// Minimum-norm theta0 with R^E theta0 = r^E and R^O theta0 = r^O. When that stacked
/// system is inconsistent, r^E is met exactly and r^O only in least squares.
inline BoundaryPoint boundary_point(const ConstraintMatrices& cm, Eigen::Index P) {
  const Matrix s = cm.stacked();
  if (s.rows() == 0) return {Vector::Zero(P), true};
  const Vector r = cm.stacked_rhs();
  Vector theta0 = linalg::pseudo_inverse(s) * r;
  const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
  if ((s * theta0 - r).cwiseAbs().maxCoeff() <= 1e-10 * scale) return {theta0, true};

  const Matrix RE = cm.RE.rows() ? cm.RE : Matrix(0, P);
  const Vector base = cm.RE.rows() ? Vector(linalg::pseudo_inverse(RE) * cm.rE) : Vector(Vector::Zero(P));
  const Matrix Dt = linalg::orthogonal_complement_rows(RE, P);
  const Matrix A = cm.RO * Dt.transpose();
  const Vector xi = linalg::pseudo_inverse(A) * (cm.rO - cm.RO * base);
  return {base + Dt.transpose() * xi, false};
}

}  // namespace cbf
