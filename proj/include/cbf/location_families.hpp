#pragma once

// Posterior/prior pairs for location parameters: Gaussian approximation, Student t
// (t-tests) and matrix t (multivariate normal linear models). Each prior is an
// adjusted fractional prior centred at the boundary point of the hypothesis it serves.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cbf/constrained_spaces.hpp"
#include "cbf/constraints.hpp"
#include "cbf/distributions.hpp"
#include "cbf/measures.hpp"
#include "cbf/parameter_space.hpp"
#include "cbf/random_stream.hpp"

namespace cbf {

enum class Side { Posterior, Prior };

/// One side (posterior or prior) of the Savage-Dickey ratio: the log density of
/// R^E theta at r^E and the probability of the order region given the equalities.
struct SideMeasure {
  double log_dens = 0.0;
  double prob = 1.0;
  double dens_se = 0.0;
  double prob_se = 0.0;
};

inline MeasureRow combine(const SideMeasure& post, const SideMeasure& prior) {
  MeasureRow r;
  r.log_fit_E = post.log_dens;
  r.log_comp_E = prior.log_dens;
  r.fit_O = post.prob;
  r.comp_O = prior.prob;
  r.fit_E_se = post.dens_se;
  r.comp_E_se = prior.dens_se;
  r.fit_O_se = post.prob_se;
  r.comp_O_se = prior.prob_se;
  return r;
}

/// Text labels used by the report.
struct FamilyInfo {
  std::string object;
  std::string parameter;
  std::string method;
};

namespace detail {

struct Conditioned {
  double log_dens = 0.0;
  Vector mean;
  Matrix cov;
  double maha = 0.0;  // squared Mahalanobis distance of r^E from the marginal mean
};

/// Marginal Gaussian density of R^E x at r^E and the conditional law of x given it.
inline Conditioned condition_gaussian(const Vector& mean, const Matrix& cov, const Matrix& RE, const Vector& rE) {
  Conditioned c{0.0, mean, cov, 0.0};
  if (RE.rows() == 0) return c;
  const Matrix M = RE * cov * RE.transpose();
  const Matrix L = linalg::cholesky_lower(M, "covariance of the equality-constrained parameters");
  const Vector resid = rE - RE * mean;
  const Vector z = L.triangularView<Eigen::Lower>().solve(resid);
  c.maha = z.squaredNorm();
  c.log_dens = -0.5 * (static_cast<double>(RE.rows()) * kLogTwoPi + linalg::log_det_from_cholesky(L) + c.maha);
  // K = cov R^T M^{-1}
  const Matrix CR = cov * RE.transpose();
  const Matrix K = L.transpose().triangularView<Eigen::Upper>().solve(L.triangularView<Eigen::Lower>().solve(CR.transpose())).transpose();
  c.mean = mean + K * resid;
  c.cov = cov - K * CR.transpose();
  c.cov = 0.5 * (c.cov + c.cov.transpose());
  return c;
}

/// Probability of {A x > b} under N(mean, cov) with a small inner Monte Carlo
/// budget when more than two rows remain random; used inside mixture estimators.
inline double region_quick(const Region& r, const Vector& mean, const Matrix& cov, RandomStream& s, int inner) {
  if (r.A.rows() == 0) return 1.0;
  const auto rr = reduce_region(r, mean, cov);
  if (rr.impossible) return 0.0;
  const Eigen::Index m = rr.shift.size();
  if (m == 0) return 1.0;
  if (m == 1) return std_normal_sf(rr.shift(0));
  if (m == 2 && std::abs(rr.corr(0, 1)) < 1.0 - 1e-12) return bivariate_upper(rr.shift(0), rr.shift(1), rr.corr(0, 1));
  const Eigen::Index k = rr.factor.cols();
  Vector z(k);
  int hits = 0;
  for (int t = 0; t < inner; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) z(j) = s.normal();
    bool in = true;
    for (Eigen::Index i = 0; i < m && in; ++i) in = rr.factor.row(i).dot(z) > rr.shift(i);
    hits += in;
  }
  return static_cast<double>(hits) / inner;
}

inline Matrix sample_gaussian(const Vector& mean, const Matrix& cov, RandomStream& s, std::size_t count) {
  const Matrix L = linalg::psd_factor(cov);
  Matrix out(mean.size(), static_cast<Eigen::Index>(count));
  Vector z(L.cols());
  for (std::size_t c = 0; c < count; ++c) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = s.normal();
    out.col(static_cast<Eigen::Index>(c)) = mean + L * z;
  }
  return out;
}

inline Matrix sample_student(const StudentTSpec& t, RandomStream& s, std::size_t count) {
  const Matrix L = linalg::psd_factor(t.scale);
  Matrix out(t.location.size(), static_cast<Eigen::Index>(count));
  Vector z(L.cols());
  for (std::size_t c = 0; c < count; ++c) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = s.normal();
    const double w = std::sqrt(s.chi_squared(t.df) / t.df);
    out.col(static_cast<Eigen::Index>(c)) = t.location + L * z / w;
  }
  return out;
}

inline Eigen::Index constraint_rank(const ConstraintMatrices& cm) {
  return cm.stacked().rows() ? linalg::numerical_rank(cm.stacked()) : 0;
}

}  // namespace detail

inline SideMeasure gaussian_side(const ConstraintMatrices& h, const GaussianSpec& g, const RandomStream& stream,
                                 std::size_t n_draws) {
  SideMeasure out;
  const auto c = detail::condition_gaussian(g.mean, g.cov, h.RE, h.rE);
  out.log_dens = c.log_dens;
  if (h.RO.rows()) {
    const Estimate e = mvn_region_prob({h.RO, h.rO}, {c.mean, c.cov}, stream, n_draws);
    out.prob = e.value;
    out.prob_se = e.se;
  }
  return out;
}

/// Student t analogue; conditioning on q^E equalities raises the degrees of freedom
/// by q^E and rescales the conditional scale by (df + d^2) / (df + q^E).
inline SideMeasure student_side(const ConstraintMatrices& h, const StudentTSpec& t, const RandomStream& stream,
                                std::size_t n_draws) {
  SideMeasure out;
  StudentTSpec cond = t;
  if (h.RE.rows()) {
    const double qE = static_cast<double>(h.RE.rows());
    out.log_dens = mvt_logpdf(h.rE, {h.RE * t.location, h.RE * t.scale * h.RE.transpose(), t.df});
    const auto c = detail::condition_gaussian(t.location, t.scale, h.RE, h.rE);
    cond.location = c.mean;
    cond.scale = c.cov * ((t.df + c.maha) / (t.df + qE));
    cond.df = t.df + qE;
  }
  if (h.RO.rows()) {
    const Estimate e = mvt_region_prob({h.RO, h.rO}, cond, stream, n_draws);
    out.prob = e.value;
    out.prob_se = e.se;
  }
  return out;
}

/// Gaussian approximation: posterior N(estimates, Sigma); prior N(theta0, Sigma / b)
/// with b = q / n and q the rank of the tested constraints.
class GaussianFamily {
 public:
  GaussianFamily(ParameterSpace space, Vector estimates, Matrix sigma, double n)
      : space_(std::move(space)), est_(std::move(estimates)), sigma_(std::move(sigma)), n_(n) {
    const auto P = static_cast<Eigen::Index>(space_.size());
    if (est_.size() != P || sigma_.rows() != P || sigma_.cols() != P) {
      throw DataError("estimates, covariance matrix and parameter names differ in size");
    }
    linalg::cholesky_lower(sigma_, "error covariance matrix");
    if (!(n_ > 1.0)) throw DataError("sample size must exceed 1");
  }

  const ParameterSpace& space() const { return space_; }
  FamilyInfo info() const { return {"estimates", "general", "Bayes factor using Gaussian approximations"}; }
  double null_value(std::size_t) const { return 0.0; }

  GaussianSpec posterior() const { return {est_, sigma_}; }

  GaussianSpec prior(const ConstraintMatrices& anchor) const {
    const auto q = std::max<Eigen::Index>(1, detail::constraint_rank(anchor));
    if (n_ <= static_cast<double>(q)) throw DataError("sample size must exceed the number of tested constraints");
    const double b = static_cast<double>(q) / n_;
    return {boundary_point(anchor, static_cast<Eigen::Index>(space_.size())).theta0, sigma_ / b};
  }

  SideMeasure side_measure(Side side, const ConstraintMatrices& anchor, const ConstraintMatrices& h,
                           const RandomStream& stream, std::size_t n_draws) const {
    return gaussian_side(h, side == Side::Posterior ? posterior() : prior(anchor), stream, n_draws);
  }

  Matrix sample(Side side, const ConstraintMatrices& anchor, RandomStream& s, std::size_t count) const {
    const GaussianSpec g = side == Side::Posterior ? posterior() : prior(anchor);
    return detail::sample_gaussian(g.mean, g.cov, s, count);
  }

 private:
  ParameterSpace space_;
  Vector est_;
  Matrix sigma_;
  double n_;
};

/// Student t posterior with a Student t adjusted fractional prior whose location is
/// moved to the boundary point (t-tests).
class StudentFamily {
 public:
  StudentFamily(ParameterSpace space, StudentTSpec posterior, double prior_df, Matrix prior_scale,
                std::vector<double> null_values, FamilyInfo info)
      : space_(std::move(space)),
        post_(std::move(posterior)),
        prior_df_(prior_df),
        prior_scale_(std::move(prior_scale)),
        nulls_(std::move(null_values)),
        info_(std::move(info)) {
    linalg::cholesky_lower(post_.scale, "posterior scale");
    linalg::cholesky_lower(prior_scale_, "prior scale");
  }

  const ParameterSpace& space() const { return space_; }
  FamilyInfo info() const { return info_; }
  double null_value(std::size_t k) const { return k < nulls_.size() ? nulls_[k] : 0.0; }

  const StudentTSpec& posterior() const { return post_; }
  StudentTSpec prior(const ConstraintMatrices& anchor) const {
    return {boundary_point(anchor, static_cast<Eigen::Index>(space_.size())).theta0, prior_scale_, prior_df_};
  }

  SideMeasure side_measure(Side side, const ConstraintMatrices& anchor, const ConstraintMatrices& h,
                           const RandomStream& stream, std::size_t n_draws) const {
    return student_side(h, side == Side::Posterior ? post_ : prior(anchor), stream, n_draws);
  }

  Matrix sample(Side side, const ConstraintMatrices& anchor, RandomStream& s, std::size_t count) const {
    return detail::sample_student(side == Side::Posterior ? post_ : prior(anchor), s, count);
  }

 private:
  ParameterSpace space_;
  StudentTSpec post_;
  double prior_df_;
  Matrix prior_scale_;
  std::vector<double> nulls_;
  FamilyInfo info_;
};

/// Matrix t law of a K x P coefficient matrix B: Sigma ~ IW(S, nu) and
/// vec(B) | Sigma ~ N(vec(center), Sigma (x) A). Parameters are vec(B), column major.
struct MatrixTSpec {
  Matrix center;  // K x P
  Matrix A;       // K x K
  Matrix S;       // P x P
  double nu = 1.0;
};

/// Normal linear model with a matrix t posterior and a matrix Cauchy fractional prior.
class MatrixTFamily {
 public:
  MatrixTFamily(ParameterSpace space, MatrixTSpec posterior, MatrixTSpec prior, FamilyInfo info)
      : space_(std::move(space)), post_(std::move(posterior)), prior_(std::move(prior)), info_(std::move(info)) {
    const auto K = post_.center.rows(), P = post_.center.cols();
    if (static_cast<Eigen::Index>(space_.size()) != K * P) throw DataError("coefficient names do not match the design");
    for (const auto* m : {&post_, &prior_}) {
      linalg::cholesky_lower(m->A, "inverse cross-product matrix");
      linalg::cholesky_lower(m->S, "residual cross-product matrix");
      if (!(m->nu > static_cast<double>(P) - 1.0)) {
        throw DataError("too few residual degrees of freedom for the number of outcomes");
      }
    }
  }

  const ParameterSpace& space() const { return space_; }
  FamilyInfo info() const { return info_; }
  double null_value(std::size_t) const { return 0.0; }
  Eigen::Index predictors() const { return post_.center.rows(); }
  Eigen::Index outcomes() const { return post_.center.cols(); }
  const MatrixTSpec& posterior() const { return post_; }

  MatrixTSpec prior(const ConstraintMatrices& anchor) const {
    MatrixTSpec p = prior_;
    const Vector theta0 = boundary_point(anchor, static_cast<Eigen::Index>(space_.size())).theta0;
    p.center = Eigen::Map<const Matrix>(theta0.data(), post_.center.rows(), post_.center.cols());
    return p;
  }

  /// Student t marginal of the coefficients `idx` when they share one outcome column
  /// or one predictor row; empty optional otherwise.
  static std::optional<StudentTSpec> analytic_marginal(const MatrixTSpec& m, const std::vector<Eigen::Index>& idx) {
    const Eigen::Index K = m.center.rows(), P = m.center.cols();
    if (idx.empty()) return std::nullopt;
    bool same_col = true, same_row = true;
    for (auto i : idx) {
      same_col = same_col && i / K == idx.front() / K;
      same_row = same_row && i % K == idx.front() % K;
    }
    if (!same_col && !same_row) return std::nullopt;
    const double df = m.nu - static_cast<double>(P) + 1.0;
    const auto d = static_cast<Eigen::Index>(idx.size());
    StudentTSpec t{Vector(d), Matrix(d, d), df};
    for (Eigen::Index a = 0; a < d; ++a) {
      const Eigen::Index ka = idx[a] % K, pa = idx[a] / K;
      t.location(a) = m.center(ka, pa);
      for (Eigen::Index b = 0; b < d; ++b) {
        const Eigen::Index kb = idx[b] % K, pb = idx[b] / K;
        t.scale(a, b) = m.S(pa, pb) * m.A(ka, kb) / df;
      }
    }
    return t;
  }

  SideMeasure side_measure(Side side, const ConstraintMatrices& anchor, const ConstraintMatrices& h,
                           const RandomStream& stream, std::size_t n_draws) const {
    const MatrixTSpec m = side == Side::Posterior ? post_ : prior(anchor);
    const auto idx = h.involved();
    if (idx.empty()) return {};
    const ConstraintMatrices sub = restrict_columns(h, idx);
    if (auto t = analytic_marginal(m, idx)) return student_side(sub, *t, stream, n_draws);
    return mixture_side(m, sub, idx, stream, n_draws);
  }

  Matrix sample(Side side, const ConstraintMatrices& anchor, RandomStream& s, std::size_t count) const {
    const MatrixTSpec m = side == Side::Posterior ? post_ : prior(anchor);
    const Eigen::Index K = m.center.rows(), P = m.center.cols();
    const Matrix LA = linalg::cholesky_lower(m.A);
    Matrix out(K * P, static_cast<Eigen::Index>(count));
    Matrix Z(K, P);
    for (std::size_t c = 0; c < count; ++c) {
      const Matrix sigma = sample_inverse_wishart(m.S, m.nu, s);
      const Matrix LS = linalg::cholesky_lower(sigma, "sampled covariance");
      for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = s.normal();
      const Matrix B = m.center + LA * Z * LS.transpose();
      out.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(B.data(), K * P);
    }
    return out;
  }

  static ConstraintMatrices restrict_columns(const ConstraintMatrices& h, const std::vector<Eigen::Index>& idx) {
    ConstraintMatrices out = h;
    const auto d = static_cast<Eigen::Index>(idx.size());
    out.RE = Matrix(h.RE.rows(), d);
    out.RO = Matrix(h.RO.rows(), d);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (h.RE.rows()) out.RE.col(j) = h.RE.col(idx[j]);
      if (h.RO.rows()) out.RO.col(j) = h.RO.col(idx[j]);
    }
    return out;
  }

 private:
  struct Draw {
    double log_w;
    double p;
  };
  struct DrawList {
    std::vector<Draw> v;
    DrawList& operator+=(const DrawList& o) {
      v.insert(v.end(), o.v.begin(), o.v.end());
      return *this;
    }
  };

  /// Averages closed-form conditional Gaussian quantities over inverse-Wishart draws
  /// of the error covariance: dens = mean(w_r), prob = sum(w_r p_r) / sum(w_r).
  static SideMeasure mixture_side(const MatrixTSpec& m, const ConstraintMatrices& h, const std::vector<Eigen::Index>& idx,
                                  const RandomStream& stream, std::size_t n_draws) {
    const Eigen::Index K = m.center.rows();
    const auto d = static_cast<Eigen::Index>(idx.size());
    Vector mean(d);
    for (Eigen::Index a = 0; a < d; ++a) mean(a) = m.center(idx[a] % K, idx[a] / K);
    const std::size_t R = std::max<std::size_t>(2000, n_draws / 10);
    constexpr int kInner = 16;
    const Region region{h.RO, h.rO};
    const DrawList all = chunked_reduce<DrawList>(stream, R, [&](RandomStream& s, std::size_t, std::size_t count) {
      DrawList out;
      Matrix cov(d, d);
      for (std::size_t t = 0; t < count; ++t) {
        const Matrix sigma = sample_inverse_wishart(m.S, m.nu, s);
        for (Eigen::Index a = 0; a < d; ++a)
          for (Eigen::Index b = 0; b < d; ++b)
            cov(a, b) = sigma(idx[a] / K, idx[b] / K) * m.A(idx[a] % K, idx[b] % K);
        const auto c = detail::condition_gaussian(mean, cov, h.RE, h.rE);
        const double p = h.RO.rows() ? detail::region_quick(region, c.mean, c.cov, s, kInner) : 1.0;
        out.v.push_back({c.log_dens, p});
      }
      return out;
    });
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& dr : all.v) top = std::max(top, dr.log_w);
    double sw = 0, sw2 = 0, swp = 0;
    for (const auto& dr : all.v) {
      const double w = std::exp(dr.log_w - top);
      sw += w;
      sw2 += w * w;
      swp += w * dr.p;
    }
    const double Rn = static_cast<double>(all.v.size());
    SideMeasure out;
    out.log_dens = h.RE.rows() ? top + std::log(sw / Rn) : 0.0;
    if (h.RE.rows()) {
      const double mw = sw / Rn;
      const double var = std::max(0.0, sw2 / Rn - mw * mw);
      out.dens_se = std::exp(top) * std::sqrt(var / Rn);
    }
    out.prob = h.RO.rows() ? swp / sw : 1.0;
    if (h.RO.rows()) {
      double acc = 0;
      for (const auto& dr : all.v) {
        const double w = std::exp(dr.log_w - top);
        acc += w * w * (dr.p - out.prob) * (dr.p - out.prob);
      }
      out.prob_se = std::sqrt(acc) / sw;
    }
    return out;
  }

  ParameterSpace space_;
  MatrixTSpec post_;
  MatrixTSpec prior_;
  FamilyInfo info_;
};

}  // namespace cbf
