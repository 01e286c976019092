#pragma once

// Result document shared by the text and JSON renderers.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbf/engine.hpp"
#include "json.hpp"

namespace cbf {

struct SpecRow {
  double comp_E = 1, comp_O = 1, fit_E = 1, fit_O = 1;
  double BF_E = 1, BF_O = 1, BF = 1, PHP = 0;
  double comp_E_se = 0, comp_O_se = 0, fit_E_se = 0, fit_O_se = 0;
  bool operator==(const SpecRow&) const = default;
};

struct ExploratoryBlock {
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  std::vector<std::vector<double>> probs;
  bool operator==(const ExploratoryBlock&) const = default;
};

struct ConfirmatoryBlock {
  std::vector<std::string> labels;
  std::vector<std::string> hypotheses;  // legend text per label
  std::vector<double> prior_weights;
  std::vector<double> php;
  std::vector<std::vector<double>> evidence;
  std::vector<SpecRow> specification;
  bool operator==(const ConfirmatoryBlock&) const = default;
};

struct ResultDocument {
  std::string schema = "bf-result/1";
  std::string object, parameter, method;
  std::uint64_t seed = kDefaultSeed;
  std::uint64_t draws = 0;
  std::uint64_t imputations = 0;  // number of imputed datasets aggregated (0 = none)
  ExploratoryBlock exploratory;
  std::optional<ConfirmatoryBlock> confirmatory;
  std::vector<std::string> warnings;
  bool operator==(const ResultDocument&) const = default;
};

inline ExploratoryBlock to_block(const ExploratoryTable& t) {
  ExploratoryBlock b{t.columns, t.row_names, {}};
  for (Eigen::Index i = 0; i < t.probs.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(t.probs.cols()));
    for (Eigen::Index j = 0; j < t.probs.cols(); ++j) r[static_cast<std::size_t>(j)] = t.probs(i, j);
    b.probs.push_back(std::move(r));
  }
  return b;
}

inline ConfirmatoryBlock to_block(const MeasureTable& t) {
  ConfirmatoryBlock b;
  b.labels = t.labels;
  b.hypotheses = t.texts;
  b.prior_weights = t.prior_weights;
  b.php = t.php;
  const Matrix e = evidence_matrix(t.log_bfs());
  for (Eigen::Index i = 0; i < e.rows(); ++i) b.evidence.emplace_back(e.row(i).begin(), e.row(i).end());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& r = t.rows[i];
    b.specification.push_back({r.comp_E(), r.comp_O, r.fit_E(), r.fit_O, r.bf_E(), r.bf_O(), r.bf(), t.php[i],
                               r.comp_E_se, r.comp_O_se, r.fit_E_se, r.fit_O_se});
  }
  return b;
}

// ---------------------------------------------------------------------------
// Text

namespace detail {
/// Right-aligned table; the first column holds row names and is left-aligned.
inline std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string l;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == 0) {
        l += fmt::format("{:<{}}", cells[j], width[j]);
      } else {
        l += fmt::format(" {:>{}}", cells[j], width[j]);
      }
    }
    while (!l.empty() && l.back() == ' ') l.pop_back();
    out += l + "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

inline std::string fixed3(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  std::string s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

inline std::string header_block(const ResultDocument& d, const char* type) {
  return fmt::format("Bayesian hypothesis test\nType: {}\nObject: {}\nParameter: {}\nMethod: {}\n\n", type, d.object,
                     d.parameter, d.method);
}
}  // namespace detail

inline std::string render_text(const ResultDocument& d) {
  using detail::fixed3;
  std::string out = detail::header_block(d, "Exploratory");
  out += "Posterior probabilities:\n";
  {
    std::vector<std::string> header{""};
    header.insert(header.end(), d.exploratory.columns.begin(), d.exploratory.columns.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < d.exploratory.rows.size(); ++i) {
      std::vector<std::string> r{d.exploratory.rows[i]};
      for (double p : d.exploratory.probs[i]) r.push_back(fixed3(p));
      rows.push_back(std::move(r));
    }
    out += detail::render_grid(header, rows);
  }
  if (d.confirmatory) {
    const auto& c = *d.confirmatory;
    out += "\n" + detail::header_block(d, "Confirmatory");
    out += "Posterior probabilities:\n";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < c.labels.size(); ++i) rows.push_back({c.labels[i], fixed3(c.php[i])});
    out += detail::render_grid({"", "Pr(hypothesis|data)"}, rows);

    out += "\nEvidence matrix:\n";
    rows.clear();
    std::vector<std::string> header{""};
    header.insert(header.end(), c.labels.begin(), c.labels.end());
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
      std::vector<std::string> r{c.labels[i]};
      for (double v : c.evidence[i]) r.push_back(fixed3(v));
      rows.push_back(std::move(r));
    }
    out += detail::render_grid(header, rows);

    out += "\nSpecification table:\n";
    rows.clear();
    for (std::size_t i = 0; i < c.labels.size(); ++i) {
      const auto& s = c.specification[i];
      rows.push_back({c.labels[i], fixed3(s.comp_E), fixed3(s.comp_O), fixed3(s.fit_E), fixed3(s.fit_O), fixed3(s.BF_E),
                      fixed3(s.BF_O), fixed3(s.BF), fixed3(s.PHP)});
    }
    out += detail::render_grid({"", "comp_E", "comp_O", "fit_E", "fit_O", "BF_E", "BF_O", "BF", "PHP"}, rows);

    out += "\nHypotheses:\n";
    for (std::size_t i = 0; i < c.labels.size(); ++i) out += fmt::format("{}: {}\n", c.labels[i], c.hypotheses[i]);
  }
  if (d.imputations > 0) out += fmt::format("\nMeasures averaged over {} imputed datasets.\n", d.imputations);
  if (!d.warnings.empty()) {
    out += "\nWarnings:\n";
    for (const auto& w : d.warnings) out += w + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {
using json = nlohmann::json;

// JSON has no Inf/NaN literals; they are written as strings.
inline json num_to_json(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return v;
}

inline double num_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "NaN") return std::nan("");
    if (s == "Inf") return HUGE_VAL;
    if (s == "-Inf") return -HUGE_VAL;
    throw DataError(fmt::format("unexpected number string '{}'", s));
  }
  return j.get<double>();
}

inline json nums_to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num_to_json(x));
  return a;
}

inline std::vector<double> nums_from_json(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(num_from_json(x));
  return out;
}

inline json grid_to_json(const std::vector<std::vector<double>>& g) {
  json a = json::array();
  for (const auto& r : g) a.push_back(nums_to_json(r));
  return a;
}

inline std::vector<std::vector<double>> grid_from_json(const json& j) {
  std::vector<std::vector<double>> out;
  for (const auto& r : j) out.push_back(nums_from_json(r));
  return out;
}
}  // namespace detail

inline nlohmann::json to_json(const ResultDocument& d) {
  using detail::json;
  using detail::num_to_json;
  json j;
  j["schema"] = d.schema;
  j["info"] = {{"object", d.object}, {"parameter", d.parameter}, {"method", d.method}};
  j["seed"] = d.seed;
  j["draws"] = d.draws;
  j["imputations"] = d.imputations;
  j["exploratory"] = {{"columns", d.exploratory.columns},
                      {"rows", d.exploratory.rows},
                      {"probabilities", detail::grid_to_json(d.exploratory.probs)}};
  if (d.confirmatory) {
    const auto& c = *d.confirmatory;
    json spec = json::array();
    for (const auto& s : c.specification) {
      spec.push_back({{"comp_E", num_to_json(s.comp_E)},
                      {"comp_O", num_to_json(s.comp_O)},
                      {"fit_E", num_to_json(s.fit_E)},
                      {"fit_O", num_to_json(s.fit_O)},
                      {"BF_E", num_to_json(s.BF_E)},
                      {"BF_O", num_to_json(s.BF_O)},
                      {"BF", num_to_json(s.BF)},
                      {"PHP", num_to_json(s.PHP)},
                      {"se", {{"comp_E", num_to_json(s.comp_E_se)},
                              {"comp_O", num_to_json(s.comp_O_se)},
                              {"fit_E", num_to_json(s.fit_E_se)},
                              {"fit_O", num_to_json(s.fit_O_se)}}}});
    }
    j["confirmatory"] = {{"labels", c.labels},
                         {"hypotheses", c.hypotheses},
                         {"prior_weights", detail::nums_to_json(c.prior_weights)},
                         {"php", detail::nums_to_json(c.php)},
                         {"evidence", detail::grid_to_json(c.evidence)},
                         {"specification", spec}};
  } else {
    j["confirmatory"] = nullptr;
  }
  j["warnings"] = d.warnings;
  return j;
}

inline std::string render_json(const ResultDocument& d) { return to_json(d).dump(2) + "\n"; }

inline ResultDocument from_json(const nlohmann::json& j) {
  using detail::num_from_json;
  ResultDocument d;
  try {
    d.schema = j.at("schema").get<std::string>();
    if (d.schema != "bf-result/1") throw DataError(fmt::format("unsupported result schema '{}'", d.schema));
    d.object = j.at("info").at("object").get<std::string>();
    d.parameter = j.at("info").at("parameter").get<std::string>();
    d.method = j.at("info").at("method").get<std::string>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.draws = j.at("draws").get<std::uint64_t>();
    d.imputations = j.at("imputations").get<std::uint64_t>();
    const auto& e = j.at("exploratory");
    d.exploratory = {e.at("columns").get<std::vector<std::string>>(), e.at("rows").get<std::vector<std::string>>(),
                     detail::grid_from_json(e.at("probabilities"))};
    if (!j.at("confirmatory").is_null()) {
      const auto& c = j.at("confirmatory");
      ConfirmatoryBlock b;
      b.labels = c.at("labels").get<std::vector<std::string>>();
      b.hypotheses = c.at("hypotheses").get<std::vector<std::string>>();
      b.prior_weights = detail::nums_from_json(c.at("prior_weights"));
      b.php = detail::nums_from_json(c.at("php"));
      b.evidence = detail::grid_from_json(c.at("evidence"));
      for (const auto& s : c.at("specification")) {
        const auto& se = s.at("se");
        b.specification.push_back({num_from_json(s.at("comp_E")), num_from_json(s.at("comp_O")),
                                   num_from_json(s.at("fit_E")), num_from_json(s.at("fit_O")),
                                   num_from_json(s.at("BF_E")), num_from_json(s.at("BF_O")), num_from_json(s.at("BF")),
                                   num_from_json(s.at("PHP")), num_from_json(se.at("comp_E")),
                                   num_from_json(se.at("comp_O")), num_from_json(se.at("fit_E")),
                                   num_from_json(se.at("fit_O"))});
      }
      d.confirmatory = std::move(b);
    }
    d.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed result document: ") + ex.what());
  }
  return d;
}

inline ResultDocument parse_result_json(const std::string& text) {
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed result document: ") + ex.what());
  }
}

}  // namespace cbf
