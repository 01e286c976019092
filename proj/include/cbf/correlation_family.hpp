#pragma once

// Hypotheses on (group-specific) correlations. Posterior: Gaussian on the Fisher z
// scale. Prior: joint uniform over correlation matrices, represented by a bank of
// onion-method draws per group.

#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cbf/constraints.hpp"
#include "cbf/distributions.hpp"
#include "cbf/location_families.hpp"
#include "cbf/measures.hpp"
#include "cbf/parameter_space.hpp"

namespace cbf {

struct CorrelationGroup {
  std::string name;
  double n = 0;
  Matrix cor;                // d x d sample correlations
  std::optional<Matrix> se;  // d x d standard errors of the correlations
};

class CorrelationFamily {
 public:
  CorrelationFamily(std::vector<std::string> variables, std::vector<CorrelationGroup> groups, const RandomStream& stream,
                    std::size_t n_draws)
      : vars_(std::move(variables)), groups_(std::move(groups)) {
    const auto d = static_cast<Eigen::Index>(vars_.size());
    if (d < 2) throw DataError("a correlation test needs at least two variables");
    if (groups_.empty()) throw DataError("a correlation test needs at least one group");
    std::vector<std::string> names;
    std::vector<std::pair<std::string, std::size_t>> aliases;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& grp = groups_[g];
      if (grp.cor.rows() != d || grp.cor.cols() != d) throw DataError(fmt::format("group '{}': correlation matrix must be {}x{}", grp.name, d, d));
      if (!(grp.n > 4.0)) throw DataError(fmt::format("group '{}' needs more than 4 observations", grp.name));
      const std::string suffix = groups_.size() > 1 ? "_in_" + grp.name : "";
      for (Eigen::Index i = 1; i < d; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          const double r = grp.cor(i, j);
          if (!(std::abs(r) < 1.0)) throw DataError(fmt::format("group '{}': correlations must lie strictly inside (-1, 1)", grp.name));
          if (std::abs(grp.cor(j, i) - r) > 1e-8) throw DataError(fmt::format("group '{}': correlation matrix is not symmetric", grp.name));
          const double se_z = grp.se ? (*grp.se)(i, j) / (1.0 - r * r) : 1.0 / std::sqrt(grp.n - 3.0);
          if (!(se_z > 0.0)) throw DataError(fmt::format("group '{}': standard errors must be positive", grp.name));
          index_.push_back({g, i, j});
          names.push_back(vars_[static_cast<std::size_t>(i)] + "_with_" + vars_[static_cast<std::size_t>(j)] + suffix);
          aliases.emplace_back(vars_[static_cast<std::size_t>(j)] + "_with_" + vars_[static_cast<std::size_t>(i)] + suffix,
                               names.size() - 1);
          zhat_.push_back(std::atanh(r));
          zse_.push_back(se_z);
        }
      }
    }
    space_ = ParameterSpace(names);
    for (const auto& [a, i] : aliases) space_.add_alias(a, i);
    build_bank(stream.substream(0xBA4C), n_draws);
  }

  const ParameterSpace& space() const { return space_; }
  FamilyInfo info() const { return {"correlations", "correlations", "Bayes factors based on joint uniform priors"}; }
  double null_value(std::size_t) const { return 0.0; }
  std::size_t per_group() const { return static_cast<std::size_t>(vars_.size() * (vars_.size() - 1) / 2); }

  GaussianSpec posterior_z() const {
    const auto P = static_cast<Eigen::Index>(zhat_.size());
    GaussianSpec g{Vector(P), Matrix::Zero(P, P)};
    for (Eigen::Index i = 0; i < P; ++i) {
      g.mean(i) = zhat_[static_cast<std::size_t>(i)];
      g.cov(i, i) = zse_[static_cast<std::size_t>(i)] * zse_[static_cast<std::size_t>(i)];
    }
    return g;
  }

  /// Gaussian fitted by moments to the Fisher-z prior draws (block diagonal over groups).
  const GaussianSpec& prior_z_moments() const { return prior_moments_; }

  /// Hypothesis rewritten on the Fisher z scale, when every row is of the form
  /// c*rho > r (single correlation) or c*(rho_a - rho_b) > 0.
  struct ZForm {
    ConstraintMatrices cm;
    bool impossible = false;
  };
  std::optional<ZForm> to_z(const ConstraintMatrices& h) const {
    const auto P = static_cast<Eigen::Index>(space_.size());
    ZForm out{ConstraintMatrices::empty(P), false};
    std::vector<Vector> erows, orows;
    std::vector<double> erhs, orhs;
    auto convert = [&](const Eigen::RowVectorXd& row, double rhs, bool eq) -> bool {
      std::vector<Eigen::Index> nz;
      for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) != 0.0) nz.push_back(j);
      Vector zr = Vector::Zero(P);
      if (nz.size() == 1) {
        const double c = row(nz[0]);
        const double v = rhs / c;
        if (eq) {
          if (!(std::abs(v) < 1.0)) throw HypothesisError("a correlation can only equal a value inside (-1, 1)");
          zr(nz[0]) = 1.0;
          erows.push_back(zr);
          erhs.push_back(std::atanh(v));
          return true;
        }
        const double sgn = c > 0 ? 1.0 : -1.0;
        if (v >= 1.0 && sgn > 0) out.impossible = true;
        else if (v <= -1.0 && sgn < 0) out.impossible = true;
        else if ((v <= -1.0 && sgn > 0) || (v >= 1.0 && sgn < 0)) return true;  // always satisfied
        else {
          zr(nz[0]) = sgn;
          orows.push_back(zr);
          orhs.push_back(sgn * std::atanh(v));
        }
        return true;
      }
      if (nz.size() == 2 && rhs == 0.0 && row(nz[0]) == -row(nz[1])) {
        const double sgn = row(nz[0]) > 0 ? 1.0 : -1.0;
        zr(nz[0]) = sgn;
        zr(nz[1]) = -sgn;
        (eq ? erows : orows).push_back(zr);
        (eq ? erhs : orhs).push_back(0.0);
        return true;
      }
      return false;
    };
    for (Eigen::Index i = 0; i < h.RE.rows(); ++i) {
      if (!convert(h.RE.row(i), h.rE(i), true)) {
        throw HypothesisError("equality constraints on correlations must have the form rho = c or rho_a = rho_b");
      }
    }
    bool linear = true;
    for (Eigen::Index i = 0; i < h.RO.rows(); ++i) linear = convert(h.RO.row(i), h.rO(i), false) && linear;
    if (!linear) return std::nullopt;
    auto fill = [P](const std::vector<Vector>& rows, const std::vector<double>& rhs, Matrix& M, Vector& r) {
      M.resize(static_cast<Eigen::Index>(rows.size()), P);
      r.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        M.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        r(static_cast<Eigen::Index>(i)) = rhs[i];
      }
    };
    fill(erows, erhs, out.cm.RE, out.cm.rE);
    fill(orows, orhs, out.cm.RO, out.cm.rO);
    out.cm.text = h.text;
    return out;
  }

  MeasureRow measures(const ConstraintMatrices& h, const RandomStream& stream, std::size_t n_draws) const {
    return combine(side_measure(Side::Posterior, h, h, stream.substream(1), n_draws),
                   side_measure(Side::Prior, h, h, stream.substream(2), n_draws));
  }

  SideMeasure side_measure(Side side, const ConstraintMatrices&, const ConstraintMatrices& h, const RandomStream& stream,
                           std::size_t n_draws) const {
    const auto z = to_z(h);
    // Equality rows are always z-linear (to_z throws otherwise); split them off.
    const ConstraintMatrices eq_only = equality_part(h);
    const auto zeq = to_z(eq_only);
    const GaussianSpec& g = side == Side::Posterior ? posterior_z_cached() : prior_moments_;
    if (side == Side::Prior && h.RE.rows() == 0) {
      SideMeasure out;
      if (h.RO.rows()) {
        const Estimate e = prior_fraction(h);
        out.prob = e.value;
        out.prob_se = e.se;
      }
      return out;
    }
    if (z) {
      if (z->impossible) {
        SideMeasure out = gaussian_side(zeq->cm, g, stream, n_draws);
        out.prob = 0.0;
        out.prob_se = 0.0;
        return out;
      }
      return gaussian_side(z->cm, g, stream, n_draws);
    }
    // Order rows not linear in z: condition on the equalities, then count draws whose
    // correlations satisfy the order rows.
    SideMeasure out;
    const auto c = detail::condition_gaussian(g.mean, g.cov, zeq->cm.RE, zeq->cm.rE);
    out.log_dens = c.log_dens;
    const detail::MeanAcc acc = chunked_reduce<detail::MeanAcc>(stream, n_draws, [&](RandomStream& s, std::size_t, std::size_t count) {
      detail::MeanAcc a;
      const Matrix draws = detail::sample_gaussian(c.mean, c.cov, s, count);
      for (Eigen::Index k = 0; k < draws.cols(); ++k) {
        const Vector rho = draws.col(k).array().tanh().matrix();
        a.add(h.in_order_region(rho) ? 1.0 : 0.0);
      }
      return a;
    });
    out.prob = acc.estimate().value;
    out.prob_se = std::sqrt(out.prob * (1.0 - out.prob) / static_cast<double>(acc.n));
    return out;
  }

  /// Unconstrained draws on the correlation scale.
  Matrix sample(Side side, const ConstraintMatrices&, RandomStream& s, std::size_t count) const {
    if (side == Side::Posterior) {
      const GaussianSpec& g = posterior_z_cached();
      return detail::sample_gaussian(g.mean, g.cov, s, count).array().tanh().matrix();
    }
    const auto P = static_cast<Eigen::Index>(space_.size());
    const auto d = static_cast<Eigen::Index>(vars_.size());
    Matrix out(P, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        const Matrix R = sample_uniform_corr(d, s);
        out.block(static_cast<Eigen::Index>(g * per_group()), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(per_group()), 1) =
            lower_vector(R);
      }
    }
    return out;
  }

  std::size_t bank_size() const { return bank_size_; }

 private:
  struct Index {
    std::size_t group;
    Eigen::Index i, j;
  };

  static Vector lower_vector(const Matrix& R) {
    const Eigen::Index d = R.rows();
    Vector v(d * (d - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < d; ++i)
      for (Eigen::Index j = 0; j < i; ++j) v(k++) = R(i, j);
    return v;
  }

  static ConstraintMatrices equality_part(const ConstraintMatrices& h) {
    ConstraintMatrices e = ConstraintMatrices::empty(std::max(h.RE.cols(), h.RO.cols()));
    e.RE = h.RE.rows() ? h.RE : Matrix(0, e.RO.cols());
    e.rE = h.rE;
    return e;
  }

  const GaussianSpec& posterior_z_cached() const { return posterior_; }

  void build_bank(const RandomStream& stream, std::size_t n_draws) {
    posterior_ = posterior_z();
    bank_size_ = std::clamp<std::size_t>(n_draws, 1000, kMaxBank);
    const auto d = static_cast<Eigen::Index>(vars_.size());
    const auto m = static_cast<Eigen::Index>(per_group());
    const auto P = static_cast<Eigen::Index>(space_.size());
    banks_.assign(groups_.size(), Matrix(m, static_cast<Eigen::Index>(bank_size_)));
    prior_moments_ = {Vector::Zero(P), Matrix::Zero(P, P)};
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      Matrix& bank = banks_[g];
      chunked_reduce<int>(stream.substream(g), bank_size_, [&](RandomStream& s, std::size_t begin, std::size_t count) {
        for (std::size_t t = 0; t < count; ++t) bank.col(static_cast<Eigen::Index>(begin + t)) = lower_vector(sample_uniform_corr(d, s));
        return 0;
      });
      const Matrix z = bank.array().atanh().matrix();
      const Vector mean = z.rowwise().mean();
      const Matrix centred = z.colwise() - mean;
      const auto off = static_cast<Eigen::Index>(g) * m;
      prior_moments_.mean.segment(off, m) = mean;
      prior_moments_.cov.block(off, off, m, m) = centred * centred.transpose() / static_cast<double>(bank_size_ - 1);
    }
  }

  /// Fraction of prior draws satisfying the order rows of `h`. Groups are independent,
  /// so draws from different group banks are paired over several cyclic shifts
  /// (an incomplete U-statistic) to use the banks more fully.
  Estimate prior_fraction(const ConstraintMatrices& h) const {
    std::vector<std::size_t> involved_groups;
    for (auto k : h.involved()) {
      const auto g = index_[static_cast<std::size_t>(k)].group;
      if (std::find(involved_groups.begin(), involved_groups.end(), g) == involved_groups.end()) involved_groups.push_back(g);
    }
    const std::size_t M = bank_size_;
    const std::size_t shifts = involved_groups.size() > 1 ? kShifts : 1;
    const auto m = static_cast<Eigen::Index>(per_group());
    const Eigen::Index P = static_cast<Eigen::Index>(space_.size());
    // Shift index of each group among the involved ones.
    std::vector<std::size_t> pos(groups_.size(), 0);
    for (std::size_t t = 0; t < involved_groups.size(); ++t) pos[involved_groups[t]] = t;
    const detail::MeanAcc acc = chunked_reduce<detail::MeanAcc>(RandomStream(0), M, [&](RandomStream&, std::size_t begin, std::size_t count) {
      detail::MeanAcc a;
      Vector rho = Vector::Zero(P);
      for (std::size_t i = begin; i < begin + count; ++i) {
        std::size_t hits = 0;
        for (std::size_t s = 0; s < shifts; ++s) {
          for (auto g : involved_groups) {
            const std::size_t col = (i + s * pos[g]) % M;
            rho.segment(static_cast<Eigen::Index>(g) * m, m) = banks_[g].col(static_cast<Eigen::Index>(col));
          }
          hits += h.in_order_region(rho) ? 1 : 0;
        }
        a.add(static_cast<double>(hits) / static_cast<double>(shifts));
      }
      return a;
    });
    Estimate e = acc.estimate();
    // Per-index averages are positively correlated across shifts; report the binomial
    // SE of the bank size as a conservative bound when it is larger.
    e.se = std::max(e.se, std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(M)));
    return e;
  }

  static constexpr std::size_t kMaxBank = 200000;
  static constexpr std::size_t kShifts = 32;

  std::vector<std::string> vars_;
  std::vector<CorrelationGroup> groups_;
  ParameterSpace space_;
  std::vector<Index> index_;
  std::vector<double> zhat_, zse_;
  GaussianSpec posterior_;
  GaussianSpec prior_moments_;
  std::vector<Matrix> banks_;
  std::size_t bank_size_ = 0;
};

}  // namespace cbf
