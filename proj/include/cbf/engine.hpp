#pragma once

#include <fmt/format.h>

#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cbf/correlation_family.hpp"
#include "cbf/hypothesis.hpp"
#include "cbf/location_families.hpp"
#include "cbf/lp.hpp"
#include "cbf/measures.hpp"
#include "cbf/variance_family.hpp"

namespace cbf {

/// Unconstrained posterior and default prior of one model family.
using PosteriorSpec = std::variant<GaussianFamily, StudentFamily, MatrixTFamily, VarianceFamily, CorrelationFamily>;

inline constexpr std::uint64_t kDefaultSeed = 20191116;

struct EngineOptions {
  std::uint64_t seed = kDefaultSeed;
  std::size_t n_draws = 100000;
  double target_se = 0.002;  // on probabilities; exceeded once => rerun with 10x draws
};

inline const ParameterSpace& space_of(const PosteriorSpec& ps) {
  return std::visit([](const auto& f) -> const ParameterSpace& { return f.space(); }, ps);
}

inline FamilyInfo info_of(const PosteriorSpec& ps) {
  return std::visit([](const auto& f) { return f.info(); }, ps);
}

namespace detail {
template <class F>
concept HasOwnMeasures = requires(const F& f, const ConstraintMatrices& h, const RandomStream& s) {
  { f.measures(h, s, std::size_t{}) } -> std::same_as<MeasureRow>;
};

template <class Fn>
MeasureRow with_escalation(Fn fn, const EngineOptions& opt) {
  MeasureRow r = fn(opt.n_draws);
  if (r.max_prob_se() > opt.target_se) r = fn(opt.n_draws * 10);
  return r;
}
}  // namespace detail

/// (comp_E, comp_O, fit_E, fit_O) of hypothesis `h`.
template <class F>
MeasureRow measures_for_hypothesis(const F& f, const ConstraintMatrices& h, const RandomStream& stream,
                                   std::size_t n_draws) {
  if constexpr (detail::HasOwnMeasures<F>) {
    return f.measures(h, stream, n_draws);
  } else {
    return combine(f.side_measure(Side::Posterior, h, h, stream.substream(1), n_draws),
                   f.side_measure(Side::Prior, h, h, stream.substream(2), n_draws));
  }
}

inline MeasureRow measures_for_hypothesis(const PosteriorSpec& ps, const ConstraintMatrices& h,
                                          const RandomStream& stream, std::size_t n_draws) {
  return std::visit([&](const auto& f) { return measures_for_hypothesis(f, h, stream, n_draws); }, ps);
}

/// Measures of the complement of the user hypotheses: one minus the prior/posterior
/// probability of the union of the order-only hypotheses (hypotheses with equalities
/// have measure zero). Pairwise disjoint cones are summed; overlapping ones are
/// handled by membership Monte Carlo.
template <class F>
MeasureRow complement_measures(const F& f, const std::vector<ConstraintMatrices>& hyps, const RandomStream& stream,
                               std::size_t n_draws) {
  const auto P = static_cast<Eigen::Index>(f.space().size());
  std::vector<const ConstraintMatrices*> cones;
  for (const auto& h : hyps)
    if (h.is_order_only()) cones.push_back(&h);
  MeasureRow row;
  if (cones.empty()) return row;

  ConstraintMatrices anchor = ConstraintMatrices::empty(P);
  for (const auto* c : cones) {
    anchor.RO = linalg::vstack(anchor.RO, c->RO);
    anchor.rO = linalg::vconcat(anchor.rO, c->rO);
  }
  bool disjoint = true;
  for (std::size_t i = 0; i < cones.size() && disjoint; ++i) {
    for (std::size_t j = i + 1; j < cones.size() && disjoint; ++j) {
      disjoint = !lp::strictly_feasible(Matrix(0, P), Vector(0), linalg::vstack(cones[i]->RO, cones[j]->RO),
                                        linalg::vconcat(cones[i]->rO, cones[j]->rO));
    }
  }
  auto union_prob = [&](Side side, const RandomStream& s) -> Estimate {
    if (disjoint) {
      Estimate e;
      double var = 0.0;
      for (std::size_t i = 0; i < cones.size(); ++i) {
        const auto m = f.side_measure(side, anchor, *cones[i], s.substream(i), n_draws);
        e.value += m.prob;
        var += m.prob_se * m.prob_se;
      }
      e.se = std::sqrt(var);
      return e;
    }
    const detail::MeanAcc acc = chunked_reduce<detail::MeanAcc>(s, n_draws, [&](RandomStream& rs, std::size_t, std::size_t count) {
      detail::MeanAcc a;
      const Matrix draws = f.sample(side, anchor, rs, count);
      for (Eigen::Index k = 0; k < draws.cols(); ++k) {
        bool any = false;
        for (const auto* c : cones) any = any || c->in_order_region(draws.col(k));
        a.add(any ? 1.0 : 0.0);
      }
      return a;
    });
    const double p = acc.estimate().value;
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(acc.n))};
  };
  const Estimate post = union_prob(Side::Posterior, stream.substream(1));
  const Estimate prior = union_prob(Side::Prior, stream.substream(2));
  row.fit_O = std::clamp(1.0 - post.value, 0.0, 1.0);
  row.fit_O_se = post.se;
  row.comp_O = std::clamp(1.0 - prior.value, 0.0, 1.0);
  row.comp_O_se = prior.se;
  // Exact coverage up to rounding.
  if (row.comp_O < 1e-12) row.comp_O = 0.0;
  return row;
}

inline MeasureRow complement_measures(const PosteriorSpec& ps, const std::vector<ConstraintMatrices>& hyps,
                                      const RandomStream& stream, std::size_t n_draws) {
  return std::visit([&](const auto& f) { return complement_measures(f, hyps, stream, n_draws); }, ps);
}

/// Measures, Bayes factors and posterior probabilities for a hypothesis system.
/// A complement with zero prior measure is dropped and the weights renormalised.
inline MeasureTable confirmatory(const PosteriorSpec& ps, const HypothesisSystem& sys, const EngineOptions& opt = {}) {
  const RandomStream root(opt.seed, 1);
  MeasureTable t;
  for (std::size_t i = 0; i < sys.hypotheses.size(); ++i) {
    const auto& h = sys.hypotheses[i];
    t.rows.push_back(detail::with_escalation(
        [&](std::size_t n) { return measures_for_hypothesis(ps, h, root.substream(i), n); }, opt));
    t.labels.push_back(sys.labels[i]);
    t.texts.push_back(h.text);
    t.prior_weights.push_back(sys.prior_weights[i]);
  }
  if (sys.complement_included) {
    const auto row = detail::with_escalation(
        [&](std::size_t n) { return complement_measures(ps, sys.hypotheses, root.substream(sys.hypotheses.size()), n); }, opt);
    if (row.comp_O > 0.0) {
      t.rows.push_back(row);
      t.labels.push_back(sys.labels.back());
      t.texts.push_back("complement");
      t.prior_weights.push_back(sys.prior_weights.back());
    } else {
      double total = 0.0;
      for (double w : t.prior_weights) total += w;
      if (total > 0.0)
        for (double& w : t.prior_weights) w /= total;
    }
  }
  finalize(t);
  return t;
}

/// Pr(= c), Pr(< c), Pr(> c) per parameter with equal prior weights.
template <class F>
ExploratoryTable exploratory_triad(const F& f, const EngineOptions& opt) {
  const RandomStream root(opt.seed, 2);
  const auto P = static_cast<Eigen::Index>(f.space().size());
  ExploratoryTable t;
  bool common = true;
  for (Eigen::Index k = 0; k < P; ++k) common = common && f.null_value(static_cast<std::size_t>(k)) == f.null_value(0);
  const double c0 = f.null_value(0);
  t.columns = common ? std::vector<std::string>{fmt::format("Pr(={})", c0), fmt::format("Pr(<{})", c0), fmt::format("Pr(>{})", c0)}
                     : std::vector<std::string>{"Pr(=c)", "Pr(<c)", "Pr(>c)"};
  for (Eigen::Index k = 0; k < P; ++k) {
    const double c = f.null_value(static_cast<std::size_t>(k));
    ConstraintMatrices eq = ConstraintMatrices::empty(P), lt = eq, gt = eq;
    eq.RE = Matrix::Zero(1, P);
    eq.RE(0, k) = 1.0;
    eq.rE = Vector::Constant(1, c);
    lt.RO = -eq.RE;
    lt.rO = Vector::Constant(1, -c);
    gt.RO = eq.RE;
    gt.rO = eq.rE;
    const std::string& name = f.space().name(static_cast<std::size_t>(k));
    MeasureTable mt;
    mt.labels = {"H1", "H2", "H3"};
    mt.texts = {fmt::format("{}={}", name, c), fmt::format("{}<{}", name, c), fmt::format("{}>{}", name, c)};
    mt.prior_weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    int part = 0;
    for (const auto* h : {&eq, &lt, &gt}) {
      const RandomStream s = root.substream(static_cast<std::uint64_t>(3 * k + part++));
      mt.rows.push_back(detail::with_escalation([&](std::size_t n) { return measures_for_hypothesis(f, *h, s, n); }, opt));
    }
    t.tables.push_back(std::move(mt));
    t.row_names.push_back(name);
  }
  t.refresh();
  return t;
}

/// Homogeneity of all group variances against the unconstrained model.
inline ExploratoryTable exploratory_variances(const VarianceFamily& f) {
  const auto J = static_cast<Eigen::Index>(f.space().size());
  ConstraintMatrices all = ConstraintMatrices::empty(J);
  all.RE = Matrix::Zero(J - 1, J);
  all.rE = Vector::Zero(J - 1);
  for (Eigen::Index j = 0; j + 1 < J; ++j) {
    all.RE(j, j) = 1.0;
    all.RE(j, j + 1) = -1.0;
  }
  MeasureTable mt;
  mt.labels = {"H1", "H2"};
  mt.texts = {"homogeneity", "unconstrained"};
  mt.prior_weights = {0.5, 0.5};
  MeasureRow eq;
  eq.log_fit_E = f.log_bf_equalities(all);
  mt.rows = {eq, MeasureRow{}};
  ExploratoryTable t;
  t.columns = {"homogeneity of variances", "no homogeneity of variances"};
  t.row_names = {""};
  t.tables.push_back(std::move(mt));
  t.refresh();
  return t;
}

inline ExploratoryTable exploratory(const PosteriorSpec& ps, const EngineOptions& opt = {}) {
  return std::visit(
      [&](const auto& f) -> ExploratoryTable {
        if constexpr (std::is_same_v<std::decay_t<decltype(f)>, VarianceFamily>) {
          return exploratory_variances(f);
        } else {
          return exploratory_triad(f, opt);
        }
      },
      ps);
}

/// Joint test of theta_k = 0 for every k in `subset` against the unconstrained model;
/// returns (Pr(null), Pr(alternative)) under equal prior weights.
inline std::pair<double, double> grouped_effect_test(const PosteriorSpec& ps, const std::vector<std::size_t>& subset,
                                                     const EngineOptions& opt = {}) {
  if (subset.empty()) throw DataError("grouped effect test needs at least one coefficient");
  const auto P = static_cast<Eigen::Index>(space_of(ps).size());
  ConstraintMatrices h = ConstraintMatrices::empty(P);
  h.RE = Matrix::Zero(static_cast<Eigen::Index>(subset.size()), P);
  h.rE = Vector::Zero(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t i = 0; i < subset.size(); ++i) h.RE(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(subset[i])) = 1.0;
  const auto row = measures_for_hypothesis(ps, h, RandomStream(opt.seed, 3), opt.n_draws);
  const auto php = posterior_probs({row.log_bf(), 0.0}, {0.5, 0.5});
  return {php[0], php[1]};
}

}  // namespace cbf
