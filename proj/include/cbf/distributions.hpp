#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "cbf/errors.hpp"
#include "cbf/linalg.hpp"
#include "cbf/lp.hpp"
#include "cbf/random_stream.hpp"

namespace cbf {

struct GaussianSpec {
  Vector mean;
  Matrix cov;
};

struct StudentTSpec {
  Vector location;
  Matrix scale;
  double df = 1.0;
};

/// The open polyhedron {x : A x > b}.
struct Region {
  Matrix A;
  Vector b;
};

/// A probability (or density) together with its Monte Carlo standard error; se is 0
/// for values computed in closed form.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

namespace detail {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

struct MeanAcc {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;
  MeanAcc& operator+=(const MeanAcc& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    n += o.n;
    return *this;
  }
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  Estimate estimate() const {
    if (n == 0) return {};
    const double m = sum / static_cast<double>(n);
    const double var = n > 1 ? std::max(0.0, (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)) : 0.0;
    return {m, std::sqrt(var / static_cast<double>(n))};
  }
};

inline double std_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// P(Y1 > c1, Y2 > c2) for a bivariate normal with unit variances and correlation rho.
inline double bivariate_upper(double c1, double c2, double rho) {
  if (c1 == 0.0 && c2 == 0.0) return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
  const double s = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  auto f = [&](double y) {
    const double dens = std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
    return dens * std_normal_sf((c2 - rho * y) / s);
  };
  const double upper = std::max(c1, 0.0) + 40.0;
  if (c1 < -40.0) c1 = -40.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, c1, upper, 15, 1e-13);
}

/// Reduces P(A X > b), X ~ N(mu, S), to the standardised rows of Y = A X.
/// Rows with (numerically) zero variance are deterministic and checked directly.
struct ReducedRegion {
  Vector shift;   // (b - A mu) / sd, for random rows
  Matrix factor;  // m' x k factor of the standardised covariance
  Matrix corr;    // m' x m'
  bool impossible = false;
};

inline ReducedRegion reduce_region(const Region& r, const Vector& mu, const Matrix& cov) {
  ReducedRegion out;
  const Vector mean = r.A * mu;
  const Matrix M = r.A * cov * r.A.transpose();
  const double scale = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < r.A.rows(); ++i) {
    if (M(i, i) > 1e-13 * scale) {
      keep.push_back(i);
    } else if (!(mean(i) > r.b(i) + 1e-12 * std::max(1.0, std::abs(r.b(i))))) {
      out.impossible = true;
    }
  }
  const auto m = static_cast<Eigen::Index>(keep.size());
  out.shift.resize(m);
  out.corr.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double si = std::sqrt(M(keep[i], keep[i]));
    out.shift(i) = (r.b(keep[i]) - mean(keep[i])) / si;
    for (Eigen::Index j = 0; j < m; ++j) out.corr(i, j) = M(keep[i], keep[j]) / (si * std::sqrt(M(keep[j], keep[j])));
  }
  out.factor = m ? linalg::psd_factor(out.corr) : Matrix(0, 0);
  return out;
}

/// Monte Carlo P(L z > shift * scale) for z ~ N(0, I), where each draw's scale is
/// 1 (Gaussian) or sqrt(df / chi2_df) (Student t). Antithetic pairs are used only
/// when a pilot shows they reduce variance.
inline Estimate region_mc(const ReducedRegion& rr, double df, const RandomStream& stream, std::size_t n_draws) {
  const Eigen::Index m = rr.factor.rows(), k = rr.factor.cols();
  auto inside = [&](const Vector& z, double w) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(rr.factor.row(i).dot(z) > rr.shift(i) * w)) return false;
    }
    return true;
  };
  auto draw_w = [&](RandomStream& s) { return df > 0 ? std::sqrt(s.chi_squared(df) / df) : 1.0; };

  bool antithetic = false;
  {
    RandomStream pilot = stream.substream(0xA11CE);
    double sa = 0, sb = 0, sab = 0;
    const int pairs = 1024;
    Vector z(k);
    for (int p = 0; p < pairs; ++p) {
      for (Eigen::Index j = 0; j < k; ++j) z(j) = pilot.normal();
      const double w = draw_w(pilot);
      const double a = inside(z, w), b = inside(-z, w);
      sa += a;
      sb += b;
      sab += a * b;
    }
    const double cov = sab / pairs - (sa / pairs) * (sb / pairs);
    antithetic = cov < 0.0;
  }

  const std::size_t units = antithetic ? (n_draws + 1) / 2 : n_draws;
  const MeanAcc acc = chunked_reduce<MeanAcc>(stream, units, [&](RandomStream& s, std::size_t, std::size_t count) {
    MeanAcc a;
    Vector z(k);
    for (std::size_t t = 0; t < count; ++t) {
      for (Eigen::Index j = 0; j < k; ++j) z(j) = s.normal();
      const double w = draw_w(s);
      if (antithetic) {
        a.add(0.5 * (static_cast<double>(inside(z, w)) + static_cast<double>(inside(-z, w))));
      } else {
        a.add(inside(z, w) ? 1.0 : 0.0);
      }
    }
    return a;
  });
  Estimate e = acc.estimate();
  if (!antithetic) {
    // Binomial SE; also well defined when every draw agrees.
    e.se = std::sqrt(std::max(e.value * (1.0 - e.value), 0.0) / static_cast<double>(acc.n));
  }
  return e;
}

inline bool region_vacuous_or_empty(const Region& r, double& value) {
  if (r.A.rows() == 0) {
    value = 1.0;
    return true;
  }
  if (!lp::strictly_feasible(Matrix(0, r.A.cols()), Vector(0), r.A, r.b)) {
    value = 0.0;
    return true;
  }
  return false;
}

}  // namespace detail

inline double mvn_logpdf(const Vector& x, const GaussianSpec& g) {
  const Matrix L = linalg::cholesky_lower(g.cov);
  const Vector z = L.triangularView<Eigen::Lower>().solve(x - g.mean);
  return -0.5 * (static_cast<double>(x.size()) * detail::kLogTwoPi + linalg::log_det_from_cholesky(L) + z.squaredNorm());
}

inline double mvn_pdf(const Vector& x, const GaussianSpec& g) { return std::exp(mvn_logpdf(x, g)); }

inline double mvt_logpdf(const Vector& x, const StudentTSpec& t) {
  if (!(t.df > 0.0)) throw NumericalError("Student t degrees of freedom must be positive");
  const Matrix L = linalg::cholesky_lower(t.scale, "scale matrix");
  const Vector z = L.triangularView<Eigen::Lower>().solve(x - t.location);
  const double d = static_cast<double>(x.size());
  return std::lgamma(0.5 * (t.df + d)) - std::lgamma(0.5 * t.df) - 0.5 * d * std::log(t.df * std::numbers::pi) -
         0.5 * linalg::log_det_from_cholesky(L) - 0.5 * (t.df + d) * std::log1p(z.squaredNorm() / t.df);
}

inline double mvt_pdf(const Vector& x, const StudentTSpec& t) { return std::exp(mvt_logpdf(x, t)); }

/// P(A X > b) for X ~ N(mean, cov); cov may be singular (conditional distributions).
/// One random row: error function. Two rows: one-dimensional quadrature (the asin
/// formula for a centred orthant). Otherwise Monte Carlo.
inline Estimate mvn_region_prob(const Region& r, const GaussianSpec& g, const RandomStream& stream,
                                std::size_t n_draws) {
  double v = 0.0;
  if (detail::region_vacuous_or_empty(r, v)) return {v, 0.0};
  const auto rr = detail::reduce_region(r, g.mean, g.cov);
  if (rr.impossible) return {0.0, 0.0};
  const Eigen::Index m = rr.shift.size();
  if (m == 0) return {1.0, 0.0};
  if (m == 1) return {detail::std_normal_sf(rr.shift(0)), 0.0};
  if (m == 2 && std::abs(rr.corr(0, 1)) < 1.0 - 1e-12) {
    return {detail::bivariate_upper(rr.shift(0), rr.shift(1), rr.corr(0, 1)), 0.0};
  }
  return detail::region_mc(rr, 0.0, stream, n_draws);
}

/// Student t analogue of mvn_region_prob, using the scale-mixture representation.
inline Estimate mvt_region_prob(const Region& r, const StudentTSpec& t, const RandomStream& stream,
                                std::size_t n_draws) {
  double v = 0.0;
  if (detail::region_vacuous_or_empty(r, v)) return {v, 0.0};
  const auto rr = detail::reduce_region(r, t.location, t.scale);
  if (rr.impossible) return {0.0, 0.0};
  const Eigen::Index m = rr.shift.size();
  if (m == 0) return {1.0, 0.0};
  if (m == 1) {
    boost::math::students_t_distribution<double> st(t.df);
    return {boost::math::cdf(boost::math::complement(st, rr.shift(0))), 0.0};
  }
  if ((rr.shift.array() == 0.0).all() && m == 2 && std::abs(rr.corr(0, 1)) < 1.0 - 1e-12) {
    // A cone with apex at the location has the same probability under any elliptical law.
    return {detail::bivariate_upper(0.0, 0.0, rr.corr(0, 1)), 0.0};
  }
  if (m == 2 && std::abs(rr.corr(0, 1)) < 1.0 - 1e-12) {
    // Integrate the Gaussian result over the chi-square mixing density.
    boost::math::chi_squared_distribution<double> chi(t.df);
    auto f = [&](double u) {
      const double w = std::sqrt(u / t.df);
      return boost::math::pdf(chi, u) * detail::bivariate_upper(rr.shift(0) * w, rr.shift(1) * w, rr.corr(0, 1));
    };
    const double hi = boost::math::quantile(boost::math::complement(chi, 1e-14));
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, hi, 10, 1e-10);
    return {std::clamp(val, 0.0, 1.0), 0.0};
  }
  return detail::region_mc(rr, t.df, stream, n_draws);
}

/// Inverse-Wishart draw with E = scale / (df - dim - 1), via the Bartlett decomposition
/// of the matching Wishart(scale^{-1}, df).
inline Matrix sample_inverse_wishart(const Matrix& scale, double df, RandomStream& stream) {
  const Eigen::Index d = scale.rows();
  if (!(df > static_cast<double>(d) - 1.0)) throw NumericalError("inverse-Wishart degrees of freedom too small");
  const Matrix C = linalg::cholesky_lower(scale, "inverse-Wishart scale");
  Matrix A = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    A(i, i) = std::sqrt(stream.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = stream.normal();
  }
  // W^{-1} = C A^{-T} A^{-1} C^T
  const Matrix Ainv = A.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  const Matrix M = C * Ainv.transpose();
  Matrix out = M * M.transpose();
  return 0.5 * (out + out.transpose());
}

/// Correlation matrix drawn uniformly over the positive-definite correlation matrices
/// (onion method with unit shape).
inline Matrix sample_uniform_corr(Eigen::Index dim, RandomStream& stream) {
  if (dim < 1) throw DataError("correlation dimension must be positive");
  Matrix R = Matrix::Identity(dim, dim);
  if (dim == 1) return R;
  double beta = 1.0 + 0.5 * static_cast<double>(dim - 2);
  const double r12 = 2.0 * stream.beta(beta, beta) - 1.0;
  R(0, 1) = R(1, 0) = r12;
  for (Eigen::Index k = 2; k < dim; ++k) {
    beta -= 0.5;
    const double y = stream.beta(0.5 * static_cast<double>(k), beta);
    Vector u(k);
    for (Eigen::Index j = 0; j < k; ++j) u(j) = stream.normal();
    u /= u.norm();
    const Vector w = std::sqrt(y) * u;
    const Eigen::LLT<Matrix> llt(R.topLeftCorner(k, k));
    const Vector z = llt.matrixL() * w;
    R.block(0, k, k, 1) = z;
    R.block(k, 0, 1, k) = z.transpose();
  }
  return R;
}

inline double invgamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

inline double invgamma_pdf(double x, double shape, double scale) { return std::exp(invgamma_logpdf(x, shape, scale)); }

inline double invgamma_cdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return 0.0;
  return boost::math::gamma_q(shape, scale / x);
}

inline double invgamma_quantile(double p, double shape, double scale) {
  return boost::math::quantile(boost::math::inverse_gamma_distribution<double>(shape, scale), p);
}

/// P(lower < X < upper) for X ~ IG(shape, scale).
inline double invgamma_interval_prob(double lower, double upper, double shape, double scale) {
  const double hi = std::isinf(upper) ? 1.0 : invgamma_cdf(upper, shape, scale);
  return std::max(0.0, hi - invgamma_cdf(lower, shape, scale));
}

inline double invgamma_sample(double shape, double scale, RandomStream& stream) {
  return scale / stream.gamma(shape, 1.0);
}

/// P(X > Y) for independent X ~ IG(a1, b1), Y ~ IG(a2, b2), by quadrature in log x.
inline double invgamma_greater_prob(double a1, double b1, double a2, double b2) {
  auto f = [&](double t) {
    const double x = std::exp(t);
    return std::exp(invgamma_logpdf(x, a1, b1) + t) * invgamma_cdf(x, a2, b2);
  };
  const double lo = std::log(invgamma_quantile(1e-15, a1, b1));
  const double hi = std::log(invgamma_quantile(1.0 - 1e-15, a1, b1));
  double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-12);
  return std::clamp(v, 0.0, 1.0);
}

inline double chi_squared_pdf(double x, double df) {
  return boost::math::pdf(boost::math::chi_squared_distribution<double>(df), x);
}

inline double f_pdf(double x, double df1, double df2) {
  return boost::math::pdf(boost::math::fisher_f_distribution<double>(df1, df2), x);
}

}  // namespace cbf
