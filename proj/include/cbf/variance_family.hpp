#pragma once

// Equality/order hypotheses on group variances. Equalities merge groups into clusters
// with a common variance; the equality part of the Bayes factor is a ratio of
// fractional marginal likelihoods (closed form), the order part compares pooled
// cluster variances under inverse-gamma posteriors and fractional priors.

#include <fmt/format.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cbf/constraints.hpp"
#include "cbf/distributions.hpp"
#include "cbf/location_families.hpp"
#include "cbf/measures.hpp"
#include "cbf/parameter_space.hpp"

namespace cbf {

struct VarianceGroup {
  std::string name;
  double variance;  // sample variance s^2 (denominator n - 1)
  double n;
};

class VarianceFamily {
 public:
  explicit VarianceFamily(std::vector<VarianceGroup> groups) : groups_(std::move(groups)) {
    if (groups_.size() < 2) throw DataError("a variance test needs at least two groups");
    std::vector<std::string> names;
    for (const auto& g : groups_) {
      if (!(g.n >= 3.0)) throw DataError(fmt::format("group '{}' needs at least 3 observations", g.name));
      if (!(g.variance > 0.0) || !std::isfinite(g.variance)) {
        throw DataError(fmt::format("group '{}' has a non-positive variance", g.name));
      }
      names.push_back(g.name);
    }
    space_ = ParameterSpace(names);
  }

  const ParameterSpace& space() const { return space_; }
  FamilyInfo info() const { return {"variances", "group variances", "generalized adjusted fractional Bayes factor"}; }
  const std::vector<VarianceGroup>& groups() const { return groups_; }

  /// Minimal group fraction b_j = 2 / n_j.
  double fraction(std::size_t j) const { return 2.0 / groups_[j].n; }

  /// Cluster index per group implied by the equality rows.
  std::vector<std::size_t> clusters(const ConstraintMatrices& h) const {
    std::vector<std::size_t> parent(groups_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (Eigen::Index i = 0; i < h.RE.rows(); ++i) {
      const auto [a, b] = pair_of(h.RE.row(i), h.rE(i));
      parent[find(a)] = find(b);
    }
    std::vector<std::size_t> label(groups_.size());
    std::vector<std::size_t> roots;
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      const auto r = find(j);
      auto it = std::find(roots.begin(), roots.end(), r);
      if (it == roots.end()) {
        roots.push_back(r);
        label[j] = roots.size() - 1;
      } else {
        label[j] = static_cast<std::size_t>(it - roots.begin());
      }
    }
    return label;
  }

  /// log of the equality-part Bayes factor against the unconstrained model.
  double log_bf_equalities(const ConstraintMatrices& h) const {
    const auto lab = clusters(h);
    std::vector<std::size_t> singletons(groups_.size());
    std::iota(singletons.begin(), singletons.end(), 0);
    return log_fractional_ratio(lab) - log_fractional_ratio(singletons);
  }

  MeasureRow measures(const ConstraintMatrices& h, const RandomStream& stream, std::size_t n_draws) const {
    validate(h);
    MeasureRow row;
    row.log_fit_E = log_bf_equalities(h);
    row.log_comp_E = 0.0;
    if (h.RO.rows()) {
      const auto post = side_measure(Side::Posterior, h, h, stream.substream(1), n_draws);
      const auto prior = side_measure(Side::Prior, h, h, stream.substream(2), n_draws);
      row.fit_O = post.prob;
      row.fit_O_se = post.prob_se;
      row.comp_O = prior.prob;
      row.comp_O_se = prior.prob_se;
    }
    return row;
  }

  /// Order probability on the pooled cluster variances of `h`'s equality clustering.
  /// `anchor` is unused: the variance priors do not depend on the hypothesis.
  SideMeasure side_measure(Side side, const ConstraintMatrices&, const ConstraintMatrices& h,
                           const RandomStream& stream, std::size_t n_draws) const {
    validate(h);
    SideMeasure out;
    if (h.RO.rows() == 0) return out;
    const auto lab = clusters(h);
    const std::size_t C = *std::max_element(lab.begin(), lab.end()) + 1;
    std::vector<double> shape(C, 0.0), scale(C, 0.0);
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      const auto& g = groups_[j];
      if (side == Side::Posterior) {
        shape[lab[j]] += 0.5 * (g.n - 1.0);
        scale[lab[j]] += 0.5 * (g.n - 1.0) * g.variance;
      } else {
        const double bn1 = fraction(j) * g.n - 1.0;
        shape[lab[j]] += 0.5 * bn1;
        scale[lab[j]] += 0.5 * bn1 * kPriorScale;
      }
    }
    // Order rows on clusters: tau_a > tau_b.
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    for (Eigen::Index i = 0; i < h.RO.rows(); ++i) {
      const auto [hi, lo] = order_pair(h.RO.row(i), h.rO(i));
      const auto a = lab[hi], b = lab[lo];
      if (a == b) return {0.0, 0.0, 0.0, 0.0};
      if (std::find(rows.begin(), rows.end(), std::make_pair(a, b)) == rows.end()) rows.emplace_back(a, b);
    }
    if (rows.size() == 1) {
      const auto [a, b] = rows.front();
      out.prob = invgamma_greater_prob(shape[a], scale[a], shape[b], scale[b]);
      return out;
    }
    const detail::MeanAcc acc = chunked_reduce<detail::MeanAcc>(stream, n_draws, [&](RandomStream& s, std::size_t, std::size_t count) {
      detail::MeanAcc a;
      std::vector<double> tau(C);
      for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t c = 0; c < C; ++c) tau[c] = invgamma_sample(shape[c], scale[c], s);
        bool in = true;
        for (const auto& [x, y] : rows) in = in && tau[x] > tau[y];
        a.add(in ? 1.0 : 0.0);
      }
      return a;
    });
    out.prob = acc.estimate().value;
    out.prob_se = std::sqrt(out.prob * (1.0 - out.prob) / static_cast<double>(acc.n));
    return out;
  }

  /// Unconstrained draws of the group variances.
  Matrix sample(Side side, const ConstraintMatrices&, RandomStream& s, std::size_t count) const {
    const auto J = static_cast<Eigen::Index>(groups_.size());
    Matrix out(J, static_cast<Eigen::Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      for (Eigen::Index j = 0; j < J; ++j) {
        const auto& g = groups_[static_cast<std::size_t>(j)];
        const double shape = side == Side::Posterior ? 0.5 * (g.n - 1.0) : 0.5 * (fraction(static_cast<std::size_t>(j)) * g.n - 1.0);
        const double scale = side == Side::Posterior ? 0.5 * (g.n - 1.0) * g.variance : shape * kPriorScale;
        out(j, static_cast<Eigen::Index>(c)) = invgamma_sample(shape, scale, s);
      }
    }
    return out;
  }

 private:
  // Common scale of the order-part priors; the order probabilities are invariant to it.
  static constexpr double kPriorScale = 1.0;

  double log_fractional_ratio(const std::vector<std::size_t>& lab) const {
    const std::size_t C = *std::max_element(lab.begin(), lab.end()) + 1;
    double out = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double N = 0, B = 0, Jc = 0, ss = 0, ssb = 0;
      for (std::size_t j = 0; j < groups_.size(); ++j) {
        if (lab[j] != c) continue;
        const auto& g = groups_[j];
        N += g.n;
        B += fraction(j) * g.n;
        Jc += 1.0;
        ss += (g.n - 1.0) * g.variance;
        ssb += (fraction(j) * g.n - 1.0) * g.variance;
      }
      out += std::lgamma(0.5 * (N - Jc)) - std::lgamma(0.5 * (B - Jc)) + 0.5 * (B - Jc) * std::log(ssb) -
             0.5 * (N - Jc) * std::log(ss);
    }
    return out;
  }

  static std::pair<std::size_t, std::size_t> nonzero_pair(const Eigen::RowVectorXd& row, double rhs, bool& ok) {
    std::vector<std::size_t> nz;
    for (Eigen::Index j = 0; j < row.size(); ++j)
      if (row(j) != 0.0) nz.push_back(static_cast<std::size_t>(j));
    ok = nz.size() == 2 && rhs == 0.0 && row(static_cast<Eigen::Index>(nz[0])) == -row(static_cast<Eigen::Index>(nz[1]));
    if (!ok) return {0, 0};
    return {nz[0], nz[1]};
  }

  std::pair<std::size_t, std::size_t> pair_of(const Eigen::RowVectorXd& row, double rhs) const {
    bool ok = false;
    auto p = nonzero_pair(row, rhs, ok);
    if (!ok) throw HypothesisError("variance hypotheses may only compare two group variances (e.g. a = b, a > b)");
    return p;
  }

  /// (larger, smaller) group indices of an order row.
  std::pair<std::size_t, std::size_t> order_pair(const Eigen::RowVectorXd& row, double rhs) const {
    auto [a, b] = pair_of(row, rhs);
    if (row(static_cast<Eigen::Index>(a)) > 0) return {a, b};
    return {b, a};
  }

  void validate(const ConstraintMatrices& h) const {
    for (Eigen::Index i = 0; i < h.RE.rows(); ++i) pair_of(h.RE.row(i), h.rE(i));
    for (Eigen::Index i = 0; i < h.RO.rows(); ++i) pair_of(h.RO.row(i), h.rO(i));
  }

  std::vector<VarianceGroup> groups_;
  ParameterSpace space_;
};

}  // namespace cbf
