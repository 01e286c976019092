#pragma once

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cbf/errors.hpp"
#include "cbf/linalg.hpp"

namespace cbf {

/// The four factors of the extended Savage-Dickey ratio for one hypothesis:
///   B_tu = (fit_E / comp_E) * (fit_O / comp_O).
/// Densities are kept as logs; a hypothesis without equalities has log densities 0.
struct MeasureRow {
  double log_comp_E = 0.0;
  double log_fit_E = 0.0;
  double comp_O = 1.0;
  double fit_O = 1.0;
  // Monte Carlo standard errors on the natural scale (0 when exact).
  double comp_E_se = 0.0;
  double fit_E_se = 0.0;
  double comp_O_se = 0.0;
  double fit_O_se = 0.0;

  double comp_E() const { return std::exp(log_comp_E); }
  double fit_E() const { return std::exp(log_fit_E); }
  double log_bf_E() const { return log_fit_E - log_comp_E; }
  double log_bf_O() const {
    if (fit_O == comp_O) return 0.0;
    return std::log(fit_O) - std::log(comp_O);
  }
  double log_bf() const { return log_bf_E() + log_bf_O(); }
  double bf_E() const { return std::exp(log_bf_E()); }
  double bf_O() const { return std::exp(log_bf_O()); }
  double bf() const { return std::exp(log_bf()); }
  double max_prob_se() const { return std::max(comp_O_se, fit_O_se); }
};

/// Measures, Bayes factors against the unconstrained model and posterior
/// probabilities for a set of hypotheses.
struct MeasureTable {
  std::vector<std::string> labels;
  std::vector<std::string> texts;  // hypothesis as written, or "complement"
  std::vector<MeasureRow> rows;
  std::vector<double> prior_weights;
  std::vector<double> php;

  std::size_t size() const { return rows.size(); }
  std::vector<double> log_bfs() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.log_bf());
    return out;
  }
};

/// PHP_i = w_i BF_i / sum_j w_j BF_j, evaluated in the log domain. Hypotheses with
/// zero weight get exactly 0.
inline std::vector<double> posterior_probs(const std::vector<double>& log_bf, const std::vector<double>& weights) {
  if (log_bf.size() != weights.size()) throw DataError("prior weight count does not match hypothesis count");
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw DataError("prior weights must be finite and non-negative");
    if (weights[i] > 0.0) {
      any = true;
      top = std::max(top, std::log(weights[i]) + log_bf[i]);
    }
  }
  if (!any) throw DataError("prior weights are all zero");
  std::vector<double> out(weights.size(), 0.0);
  if (!std::isfinite(top)) throw NumericalError("every weighted hypothesis has a Bayes factor of zero");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      out[i] = std::exp(std::log(weights[i]) + log_bf[i] - top);
      total += out[i];
    }
  }
  for (double& p : out) p /= total;
  return out;
}

/// B_ij = BF_iu / BF_ju.
inline Matrix evidence_matrix(const std::vector<double>& log_bf) {
  const auto k = static_cast<Eigen::Index>(log_bf.size());
  Matrix e(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) e(i, j) = i == j ? 1.0 : std::exp(log_bf[i] - log_bf[j]);
  return e;
}

inline void finalize(MeasureTable& t) { t.php = posterior_probs(t.log_bfs(), t.prior_weights); }

/// Averages each of the four measures over tables computed on imputed datasets and
/// recomputes the Bayes factors and posterior probabilities from the averages.
inline MeasureTable aggregate_imputations(const std::vector<MeasureTable>& tables) {
  if (tables.empty()) throw DataError("no imputed datasets to aggregate");
  const MeasureTable& first = tables.front();
  for (const auto& t : tables) {
    if (t.labels != first.labels || t.texts != first.texts || t.prior_weights.size() != first.prior_weights.size()) {
      throw DataError("imputed datasets produced different hypothesis systems");
    }
  }
  MeasureTable out;
  out.labels = first.labels;
  out.texts = first.texts;
  out.prior_weights = first.prior_weights;
  const double m = static_cast<double>(tables.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    double cE = 0, fE = 0, cO = 0, fO = 0, cEs = 0, fEs = 0, cOs = 0, fOs = 0;
    // Densities are averaged on the natural scale, relative to the first table to
    // avoid overflow.
    const double ref_c = first.rows[i].log_comp_E, ref_f = first.rows[i].log_fit_E;
    for (const auto& t : tables) {
      const auto& r = t.rows[i];
      cE += std::exp(r.log_comp_E - ref_c);
      fE += std::exp(r.log_fit_E - ref_f);
      cO += r.comp_O;
      fO += r.fit_O;
      cEs += r.comp_E_se * r.comp_E_se;
      fEs += r.fit_E_se * r.fit_E_se;
      cOs += r.comp_O_se * r.comp_O_se;
      fOs += r.fit_O_se * r.fit_O_se;
    }
    MeasureRow row;
    row.log_comp_E = ref_c + std::log(cE / m);
    row.log_fit_E = ref_f + std::log(fE / m);
    row.comp_O = cO / m;
    row.fit_O = fO / m;
    row.comp_E_se = std::sqrt(cEs) / m;
    row.fit_E_se = std::sqrt(fEs) / m;
    row.comp_O_se = std::sqrt(cOs) / m;
    row.fit_O_se = std::sqrt(fOs) / m;
    out.rows.push_back(row);
  }
  finalize(out);
  return out;
}

/// Per-parameter exploratory probabilities; columns are Pr(=c), Pr(<c), Pr(>c) for
/// location-type parameters. `tables` keeps the underlying measures (one table per
/// row) so imputed datasets can be aggregated.
struct ExploratoryTable {
  std::vector<std::string> columns;
  std::vector<std::string> row_names;
  Matrix probs;
  std::vector<MeasureTable> tables;

  void refresh() {
    probs = Matrix(static_cast<Eigen::Index>(tables.size()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < tables.size(); ++i) {
      finalize(tables[i]);
      for (std::size_t j = 0; j < columns.size(); ++j)
        probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tables[i].php[j];
    }
  }
};

inline ExploratoryTable aggregate_imputations(const std::vector<ExploratoryTable>& tables) {
  if (tables.empty()) throw DataError("no imputed datasets to aggregate");
  ExploratoryTable out = tables.front();
  for (std::size_t r = 0; r < out.tables.size(); ++r) {
    std::vector<MeasureTable> per;
    for (const auto& t : tables) {
      if (t.row_names != out.row_names) throw DataError("imputed datasets produced different parameters");
      per.push_back(t.tables[r]);
    }
    out.tables[r] = aggregate_imputations(per);
  }
  out.refresh();
  return out;
}

}  // namespace cbf
