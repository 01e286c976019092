#pragma once

// Builders turning sufficient statistics (or raw CSV columns) into PosteriorSpec
// objects for each test family.

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cbf/engine.hpp"
#include "json.hpp"

namespace cbf {

// ---------------------------------------------------------------------------
// Summaries and spec builders

struct TTestGroup {
  double n = 0;
  double mean = 0;
  double variance = 0;  // sample variance (denominator n - 1)
};

/// One-sample (one group) or two-sample (two groups, equal variances) t-test on
/// "mu" or "difference" respectively.
inline PosteriorSpec ttest_spec(const std::vector<TTestGroup>& groups, double null_value = 0.0) {
  for (const auto& g : groups) {
    if (!(g.n >= 3.0)) throw DataError("each t-test group needs at least 3 observations");
    if (!(g.variance > 0.0) || !std::isfinite(g.variance)) throw DataError("t-test groups need a positive variance");
  }
  const auto one = [](double v) { return Matrix::Constant(1, 1, v); };
  if (groups.size() == 1) {
    const auto& g = groups.front();
    const double ss = (g.n - 1.0) * g.variance;
    StudentTSpec post{Vector::Constant(1, g.mean), one(g.variance / g.n), g.n - 1.0};
    return StudentFamily(ParameterSpace({"mu"}), post, 1.0, one(ss / g.n), {null_value},
                         {"t_test", "means", "generalized adjusted fractional Bayes factor"});
  }
  if (groups.size() == 2) {
    const auto& a = groups[0];
    const auto& b = groups[1];
    const double ssa = (a.n - 1.0) * a.variance, ssb = (b.n - 1.0) * b.variance;
    const double df = a.n + b.n - 2.0;
    const double pooled = (ssa + ssb) / df;
    StudentTSpec post{Vector::Constant(1, a.mean - b.mean), one(pooled * (1.0 / a.n + 1.0 / b.n)), df};
    // Group fractions b_j = 2 / n_j; the implied prior on the difference is t with 2 df.
    const double prior_scale = 0.5 * (2.0 / a.n * ssa + 2.0 / b.n * ssb);
    return StudentFamily(ParameterSpace({"difference"}), post, 2.0, one(prior_scale), {null_value},
                         {"t_test", "means", "generalized adjusted fractional Bayes factor"});
  }
  throw DataError("a t-test takes one or two groups");
}

/// Cross-products of one cell (a combination of categorical predictor levels).
struct LmCell {
  double n = 0;
  Matrix xtx;  // K x K
  Matrix xty;  // K x P
  Matrix yty;  // P x P
};

struct LmSummary {
  std::vector<std::string> predictors;
  std::vector<std::string> outcomes;
  std::vector<LmCell> cells;
};

inline std::vector<std::string> lm_parameter_names(const LmSummary& s) {
  std::vector<std::string> names;
  for (const auto& y : s.outcomes)
    for (const auto& x : s.predictors) names.push_back(s.outcomes.size() > 1 ? x + "_on_" + y : x);
  return names;
}

/// Normal linear model: matrix t posterior, matrix Cauchy prior from cell fractions
/// b_j = (K + P) / (J n_j), i.e. the minimal total of K + P weighted observations
/// spread evenly over the J cells.
inline PosteriorSpec lm_spec(const LmSummary& s) {
  const auto K = static_cast<Eigen::Index>(s.predictors.size());
  const auto P = static_cast<Eigen::Index>(s.outcomes.size());
  if (K == 0 || P == 0) throw DataError("linear model needs at least one predictor and one outcome");
  if (s.cells.empty()) throw DataError("linear model needs at least one group of observations");
  Matrix xtx = Matrix::Zero(K, K), xty = Matrix::Zero(K, P), yty = Matrix::Zero(P, P);
  Matrix wxtx = xtx, wxty = xty, wyty = yty;
  double n = 0, wsum = 0;
  const double J = static_cast<double>(s.cells.size());
  for (const auto& c : s.cells) {
    if (c.xtx.rows() != K || c.xtx.cols() != K || c.xty.rows() != K || c.xty.cols() != P || c.yty.rows() != P ||
        c.yty.cols() != P) {
      throw DataError("cross-product matrices do not match the predictor/outcome counts");
    }
    if (!(c.n > 0)) throw DataError("every group needs observations");
    const double b = std::min(1.0, static_cast<double>(K + P) / (J * c.n));
    xtx += c.xtx;
    xty += c.xty;
    yty += c.yty;
    wxtx += b * c.xtx;
    wxty += b * c.xty;
    wyty += b * c.yty;
    n += c.n;
    wsum += b * c.n;
  }
  if (linalg::numerical_rank(xtx) < K) throw DataError("design matrix is not of full column rank");
  if (n - static_cast<double>(K) <= static_cast<double>(P) - 1.0) throw DataError("too few observations for the model");
  Eigen::LLT<Matrix> llt(xtx), wllt(wxtx);
  if (llt.info() != Eigen::Success || wllt.info() != Eigen::Success) throw NumericalError("cross-product matrix is not positive definite");
  MatrixTSpec post, prior;
  post.A = llt.solve(Matrix::Identity(K, K));
  const Matrix B = llt.solve(xty);
  post.center = B;
  post.S = yty - B.transpose() * xty;
  post.S = 0.5 * (post.S + post.S.transpose());
  post.nu = n - static_cast<double>(K);
  prior.A = wllt.solve(Matrix::Identity(K, K));
  const Matrix Bb = wllt.solve(wxty);
  prior.center = Bb;
  prior.S = wyty - Bb.transpose() * wxty;
  prior.S = 0.5 * (prior.S + prior.S.transpose());
  prior.nu = wsum - static_cast<double>(K);
  return MatrixTFamily(ParameterSpace(lm_parameter_names(s)), post, prior,
                       {"lm", "regression coefficients", "generalized adjusted fractional Bayes factor"});
}

inline PosteriorSpec bartlett_spec(std::vector<VarianceGroup> groups) { return VarianceFamily(std::move(groups)); }

inline PosteriorSpec corr_spec(std::vector<std::string> variables, std::vector<CorrelationGroup> groups,
                               const EngineOptions& opt) {
  return CorrelationFamily(std::move(variables), std::move(groups), RandomStream(opt.seed, 4), opt.n_draws);
}

inline PosteriorSpec gaussian_spec(std::vector<std::string> names, Vector estimates, Matrix sigma, double n) {
  return GaussianFamily(ParameterSpace(std::move(names)), std::move(estimates), std::move(sigma), n);
}

// ---------------------------------------------------------------------------
// Sufficient statistics from JSON

namespace detail {
using json = nlohmann::json;

inline double num(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw DataError(fmt::format("missing numeric field '{}'", key));
  return j.at(key).get<double>();
}

inline Matrix matrix_of(const json& j, const char* what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw DataError(fmt::format("'{}' must be a matrix (array of rows)", what));
  if (!j.front().is_array()) {
    // A flat array is read as a single column.
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return m;
  }
  const auto r = static_cast<Eigen::Index>(j.size()), c = static_cast<Eigen::Index>(j.front().size());
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) throw DataError(fmt::format("'{}' has ragged rows", what));
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline std::vector<std::string> strings_of(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw DataError(fmt::format("missing string array '{}'", key));
  return j.at(key).get<std::vector<std::string>>();
}

inline const json& groups_of(const json& j) {
  if (!j.contains("groups") || !j.at("groups").is_array() || j.at("groups").empty()) {
    throw DataError("missing non-empty 'groups' array");
  }
  return j.at("groups");
}
}  // namespace detail

/// Builds a PosteriorSpec from the sufficient-statistics schema of `test`.
inline PosteriorSpec spec_from_stats(const nlohmann::json& j, const std::string& test, const EngineOptions& opt,
                                     std::optional<double> null_override = std::nullopt) {
  using detail::num;
  try {
    if (test == "ttest") {
      const double null_value = null_override ? *null_override : (j.contains("null") ? num(j, "null") : 0.0);
      std::vector<TTestGroup> groups;
      for (const auto& g : detail::groups_of(j)) {
        TTestGroup t{num(g, "n"), num(g, "mean"), 0.0};
        if (g.contains("var")) {
          t.variance = num(g, "var");
        } else if (g.contains("sd")) {
          t.variance = num(g, "sd") * num(g, "sd");
        } else if (g.contains("t")) {
          const double tv = num(g, "t");
          if (tv == 0.0) throw DataError("t statistic of 0 does not determine the standard error");
          const double se = (t.mean - null_value) / tv;
          t.variance = se * se * t.n;
        } else {
          throw DataError("t-test group needs 'var', 'sd' or 't'");
        }
        groups.push_back(t);
      }
      return ttest_spec(groups, null_value);
    }
    if (test == "gauss") {
      const auto names = detail::strings_of(j, "names");
      const Matrix est = detail::matrix_of(j.at("estimates"), "estimates");
      Matrix sigma;
      if (j.contains("sigma")) {
        sigma = detail::matrix_of(j.at("sigma"), "sigma");
      } else if (j.contains("se")) {
        const Matrix se = detail::matrix_of(j.at("se"), "se");
        sigma = Matrix(se.array().square().matrix().asDiagonal());
      } else {
        throw DataError("gaussian input needs 'sigma' or 'se'");
      }
      return gaussian_spec(names, est.col(0), sigma, num(j, "n"));
    }
    if (test == "bartlett") {
      std::vector<VarianceGroup> groups;
      for (const auto& g : detail::groups_of(j)) {
        if (!g.contains("name")) throw DataError("variance group needs a 'name'");
        groups.push_back({g.at("name").get<std::string>(), num(g, "var"), num(g, "n")});
      }
      return bartlett_spec(std::move(groups));
    }
    if (test == "corr") {
      const auto vars = detail::strings_of(j, "variables");
      std::vector<CorrelationGroup> groups;
      std::size_t k = 0;
      for (const auto& g : detail::groups_of(j)) {
        CorrelationGroup cg;
        cg.name = g.contains("name") ? g.at("name").get<std::string>() : fmt::format("g{}", ++k);
        cg.n = num(g, "n");
        cg.cor = detail::matrix_of(g.at("cor"), "cor");
        if (g.contains("se")) cg.se = detail::matrix_of(g.at("se"), "se");
        groups.push_back(std::move(cg));
      }
      return corr_spec(vars, std::move(groups), opt);
    }
    if (test == "lm") {
      LmSummary s;
      s.predictors = detail::strings_of(j, "predictors");
      s.outcomes = detail::strings_of(j, "outcomes");
      for (const auto& g : detail::groups_of(j)) {
        s.cells.push_back({num(g, "n"), detail::matrix_of(g.at("xtx"), "xtx"), detail::matrix_of(g.at("xty"), "xty"),
                           detail::matrix_of(g.at("yty"), "yty")});
      }
      return lm_spec(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed statistics file: ") + e.what());
  }
  throw DataError(fmt::format("unknown test '{}' (expected ttest, lm, bartlett, corr or gauss)", test));
}

// ---------------------------------------------------------------------------
// CSV input

/// Header plus string cells; numeric conversion happens per column on demand.
struct DataFrame {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(fmt::format("column '{}' not found", name));
    return static_cast<std::size_t>(it - header.begin());
  }

  static bool missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

  static std::optional<double> to_number(const std::string& cell) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = cell.data() + cell.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) return std::nullopt;
    return v;
  }

  bool is_numeric(std::size_t c) const {
    for (const auto& r : rows)
      if (!missing(r[c]) && !to_number(r[c])) return false;
    return true;
  }

  std::vector<double> numeric(std::size_t c) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& cell = rows[i][c];
      auto v = to_number(cell);
      if (!v) throw DataError(fmt::format("row {}: column '{}' is not numeric ('{}')", i + 2, header[c], cell));
      out.push_back(*v);
    }
    return out;
  }

  /// Rejects missing values in the given columns; listwise deletion is left to the user.
  void require_complete(const std::vector<std::size_t>& cols) const {
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (auto c : cols)
        if (missing(rows[i][c])) {
          throw DataError(fmt::format("row {}: missing value in column '{}' (supply imputed datasets with --imputations)",
                                      i + 2, header[c]));
        }
  }
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}
}  // namespace detail

inline DataFrame parse_csv(std::istream& in) {
  DataFrame df;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV input (a header row is required)");
  df.header = detail::split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != df.header.size()) {
      throw DataError(fmt::format("line {}: expected {} fields, found {}", lineno, df.header.size(), cells.size()));
    }
    df.rows.push_back(std::move(cells));
  }
  return df;
}

inline DataFrame read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  return parse_csv(in);
}

/// Distinct levels of a column, sorted (numerically when the column is numeric).
inline std::vector<std::string> levels_of(const DataFrame& df, std::size_t c) {
  std::vector<std::string> lv;
  for (const auto& r : df.rows)
    if (std::find(lv.begin(), lv.end(), r[c]) == lv.end()) lv.push_back(r[c]);
  if (df.is_numeric(c)) {
    std::sort(lv.begin(), lv.end(), [](const auto& a, const auto& b) { return *DataFrame::to_number(a) < *DataFrame::to_number(b); });
  } else {
    std::sort(lv.begin(), lv.end());
  }
  return lv;
}

/// Design matrix from predictor terms. A term is a column name or an interaction
/// "a:b"; non-numeric columns are dummy coded against their first (sorted) level and
/// named "<column><level>"; interaction columns are named "<a>_x_<b>". Rows are
/// partitioned into cells by the levels of the categorical columns.
struct Design {
  std::vector<std::string> names;
  Matrix X;
  std::vector<std::size_t> cell;  // cell index per row
  std::size_t cells = 1;
};

inline Design build_design(const DataFrame& df, const std::vector<std::string>& terms, bool intercept) {
  struct Block {
    std::vector<std::string> names;
    Matrix cols;
  };
  const auto n = static_cast<Eigen::Index>(df.rows.size());
  std::map<std::string, std::size_t> categorical;  // column -> index
  bool first_categorical_full = !intercept;
  auto column_block = [&](const std::string& name, bool main_effect) -> Block {
    const std::size_t c = df.column(name);
    if (df.is_numeric(c)) {
      const auto v = df.numeric(c);
      return {{name}, Eigen::Map<const Vector>(v.data(), n)};
    }
    categorical.emplace(name, c);
    const auto lv = levels_of(df, c);
    if (lv.size() < 2) throw DataError(fmt::format("categorical column '{}' has a single level", name));
    const bool full = main_effect && first_categorical_full;
    if (full) first_categorical_full = false;
    Block b;
    const std::size_t start = full ? 0 : 1;
    b.cols = Matrix::Zero(n, static_cast<Eigen::Index>(lv.size() - start));
    for (std::size_t l = start; l < lv.size(); ++l) {
      b.names.push_back(name + lv[l]);
      for (Eigen::Index i = 0; i < n; ++i)
        b.cols(i, static_cast<Eigen::Index>(l - start)) = df.rows[static_cast<std::size_t>(i)][c] == lv[l] ? 1.0 : 0.0;
    }
    return b;
  };

  std::vector<Block> blocks;
  if (intercept) blocks.push_back({{"Intercept"}, Matrix::Ones(n, 1)});
  for (const auto& term : terms) {
    if (term.find(':') == std::string::npos) {
      blocks.push_back(column_block(term, true));
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream ss(term);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    Block acc{{""}, Matrix::Ones(n, 1)};
    for (const auto& p : parts) {
      const Block b = column_block(p, false);
      Block next;
      next.cols = Matrix(n, acc.cols.cols() * b.cols.cols());
      for (Eigen::Index i = 0; i < acc.cols.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols.cols(); ++j) {
          next.cols.col(i * b.cols.cols() + j) = acc.cols.col(i).cwiseProduct(b.cols.col(j));
          const auto& an = acc.names[static_cast<std::size_t>(i)];
          next.names.push_back(an.empty() ? b.names[static_cast<std::size_t>(j)] : an + "_x_" + b.names[static_cast<std::size_t>(j)]);
        }
      }
      acc = std::move(next);
    }
    blocks.push_back(std::move(acc));
  }
  Design d;
  Eigen::Index K = 0;
  for (const auto& b : blocks) K += b.cols.cols();
  d.X = Matrix(n, K);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    d.X.middleCols(at, b.cols.cols()) = b.cols;
    at += b.cols.cols();
    d.names.insert(d.names.end(), b.names.begin(), b.names.end());
  }
  // Cells: combinations of categorical levels.
  std::map<std::vector<std::string>, std::size_t> ids;
  d.cell.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::string> key;
    for (const auto& [name, c] : categorical) key.push_back(df.rows[static_cast<std::size_t>(i)][c]);
    d.cell[static_cast<std::size_t>(i)] = ids.emplace(key, ids.size()).first->second;
  }
  d.cells = std::max<std::size_t>(1, ids.size());
  return d;
}

struct CsvModel {
  std::vector<std::string> outcomes;
  std::vector<std::string> predictors;
  std::optional<std::string> group;
  bool intercept = true;
  std::optional<double> null_value;
};

/// Builds a PosteriorSpec for `test` from raw data.
inline PosteriorSpec spec_from_csv(const DataFrame& df, const std::string& test, const CsvModel& m,
                                   const EngineOptions& opt) {
  std::vector<std::size_t> used;
  for (const auto& o : m.outcomes) used.push_back(df.column(o));
  for (const auto& p : m.predictors) {
    std::stringstream ss(p);
    std::string part;
    while (std::getline(ss, part, ':')) used.push_back(df.column(part));
  }
  if (m.group) used.push_back(df.column(*m.group));
  df.require_complete(used);
  if (m.outcomes.empty()) throw DataError("--outcome is required with --data");

  // Rows split by group level ("" when no grouping column).
  auto split = [&]() {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    if (!m.group) {
      std::vector<std::size_t> all(df.rows.size());
      std::iota(all.begin(), all.end(), 0);
      out.emplace_back("", all);
      return out;
    }
    const std::size_t gc = df.column(*m.group);
    for (const auto& lv : levels_of(df, gc)) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < df.rows.size(); ++i)
        if (df.rows[i][gc] == lv) idx.push_back(i);
      out.emplace_back(lv, idx);
    }
    return out;
  };
  auto moments = [](const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    double mean = 0;
    for (auto i : idx) mean += v[i];
    mean /= static_cast<double>(idx.size());
    double ss = 0;
    for (auto i : idx) ss += (v[i] - mean) * (v[i] - mean);
    return std::pair{mean, idx.size() > 1 ? ss / static_cast<double>(idx.size() - 1) : 0.0};
  };

  if (test == "ttest") {
    const auto y = df.numeric(df.column(m.outcomes.front()));
    std::vector<TTestGroup> groups;
    for (const auto& [lv, idx] : split()) {
      const auto [mean, var] = moments(y, idx);
      groups.push_back({static_cast<double>(idx.size()), mean, var});
    }
    return ttest_spec(groups, m.null_value.value_or(0.0));
  }
  if (test == "bartlett") {
    if (!m.group) throw DataError("--group is required for the variance test");
    const auto y = df.numeric(df.column(m.outcomes.front()));
    std::vector<VarianceGroup> groups;
    for (const auto& [lv, idx] : split()) {
      const auto [mean, var] = moments(y, idx);
      groups.push_back({lv, var, static_cast<double>(idx.size())});
    }
    return bartlett_spec(std::move(groups));
  }
  if (test == "corr") {
    std::vector<std::vector<double>> cols;
    for (const auto& o : m.outcomes) cols.push_back(df.numeric(df.column(o)));
    const auto d = static_cast<Eigen::Index>(cols.size());
    std::vector<CorrelationGroup> groups;
    for (const auto& [lv, idx] : split()) {
      Matrix Z(static_cast<Eigen::Index>(idx.size()), d);
      for (Eigen::Index k = 0; k < d; ++k)
        for (std::size_t r = 0; r < idx.size(); ++r) Z(static_cast<Eigen::Index>(r), k) = cols[static_cast<std::size_t>(k)][idx[r]];
      const Matrix C = Z.rowwise() - Z.colwise().mean();
      const Matrix cov = C.transpose() * C;
      const Vector sd = cov.diagonal().cwiseSqrt();
      if ((sd.array() <= 0.0).any()) throw DataError("a variable is constant within a group");
      const Matrix R = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
      groups.push_back({m.group ? *m.group + lv : lv, static_cast<double>(idx.size()), R, std::nullopt});
    }
    return corr_spec(m.outcomes, std::move(groups), opt);
  }
  if (test == "lm") {
    const Design d = build_design(df, m.predictors, m.intercept);
    if (d.names.empty()) throw DataError("linear model has no predictors");
    const auto P = static_cast<Eigen::Index>(m.outcomes.size());
    Matrix Y(d.X.rows(), P);
    for (Eigen::Index p = 0; p < P; ++p) {
      const auto v = df.numeric(df.column(m.outcomes[static_cast<std::size_t>(p)]));
      Y.col(p) = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    LmSummary s{d.names, m.outcomes, {}};
    const auto K = d.X.cols();
    s.cells.assign(d.cells, LmCell{0.0, Matrix::Zero(K, K), Matrix::Zero(K, P), Matrix::Zero(P, P)});
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
      auto& c = s.cells[d.cell[static_cast<std::size_t>(i)]];
      c.n += 1;
      c.xtx += d.X.row(i).transpose() * d.X.row(i);
      c.xty += d.X.row(i).transpose() * Y.row(i);
      c.yty += Y.row(i).transpose() * Y.row(i);
    }
    return lm_spec(s);
  }
  if (test == "gauss") throw DataError("the gaussian test takes estimates via --stats, not raw data");
  throw DataError(fmt::format("unknown test '{}' (expected ttest, lm, bartlett, corr or gauss)", test));
}

}  // namespace cbf
