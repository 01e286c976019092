#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbf/errors.hpp"

namespace cbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Relative singular-value threshold used for every rank decision.
inline constexpr double kRankTolerance = 1e-10;

inline Eigen::Index numerical_rank(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = kRankTolerance * s(0);
  return static_cast<Eigen::Index>((s.array() > cut).count());
}

inline Matrix pseudo_inverse(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = s.size() ? kRankTolerance * s(0) : 0.0;
  Vector inv = s.unaryExpr([cut](double v) { return v > cut ? 1.0 / v : 0.0; });
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthonormal basis (as rows) of the row space of `m`.
inline Matrix row_space_basis(const Matrix& m) {
  if (m.rows() == 0) return Matrix(0, m.cols());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto r = numerical_rank(m);
  return svd.matrixV().leftCols(r).transpose();
}

/// Orthonormal basis (as rows) of the orthogonal complement of the row space of `m`
/// in R^cols. Uses column-pivoted QR of m^T, so the result is deterministic.
inline Matrix orthogonal_complement_rows(const Matrix& m, Eigen::Index cols) {
  if (m.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::ColPivHouseholderQR<Matrix> qr(m.transpose());
  qr.setThreshold(kRankTolerance);
  const auto r = qr.rank();
  Matrix q = qr.householderQ() * Matrix::Identity(cols, cols);
  return q.rightCols(cols - r).transpose();
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Lower Cholesky factor; throws NumericalError unless `m` is symmetric positive definite.
inline Matrix cholesky_lower(const Matrix& m, const char* what = "covariance") {
  if (!is_symmetric(m, 1e-9)) throw NumericalError(std::string(what) + " is not symmetric");
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

/// Square-root factor L (n x rank) with L L^T = m for a symmetric positive semi-definite m.
inline Matrix psd_factor(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  const Vector& ev = es.eigenvalues();
  const double top = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  const double cut = kRankTolerance * top;
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) keep += ev(i) > cut ? 1 : 0;
  Matrix f(m.rows(), keep);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cut) f.col(c++) = es.eigenvectors().col(i) * std::sqrt(ev(i));
  }
  return f;
}

inline double log_det_from_cholesky(const Matrix& l) {
  return 2.0 * l.diagonal().array().log().sum();
}

inline Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), std::max(a.cols(), b.cols()));
  if (a.rows()) out.topRows(a.rows()) = a;
  if (b.rows()) out.bottomRows(b.rows()) = b;
  return out;
}

inline Vector vconcat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

inline Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace linalg
}  // namespace cbf
