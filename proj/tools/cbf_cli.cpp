// Command-line front end: exploratory and confirmatory Bayes factor tests from CSV
// data or sufficient statistics.

#include <fmt/format.h>

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cbf/run.hpp"

namespace {

enum ExitCode { kOk = 0, kParse = 2, kData = 3, kNumerical = 4 };

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayes factors and posterior probabilities for equality/order constrained hypotheses"};
  cbf::RunConfig cfg;
  std::string data, stats, imputations, hypothesis, prior, outcome, predictors, group, format = "table";
  double null_value = 0.0;
  bool no_intercept = false;

  app.add_option("--data", data, "CSV file (header row, comma separated, NA or empty = missing)");
  app.add_option("--stats", stats, "sufficient-statistics JSON file");
  app.add_option("--imputations", imputations, "directory of imputed CSV datasets; measures are averaged");
  app.add_option("--test", cfg.test, "model family")->check(CLI::IsMember({"ttest", "lm", "bartlett", "corr", "gauss"}));
  app.add_option("--outcome", outcome, "outcome column(s), comma separated");
  app.add_option("--predictors", predictors, "predictor terms, comma separated; a:b adds an interaction");
  app.add_option("--group", group, "grouping column");
  app.add_option("--hypothesis", hypothesis, "hypotheses separated by ';', constraints joined by '&'");
  app.add_option("--prior", prior, "prior weights, comma separated, one per hypothesis (including the complement)");
  app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app.add_option("--draws", cfg.draws, "Monte Carlo draws per probability")->capture_default_str();
  app.add_option("--format", format, "output format")->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  auto* null_opt = app.add_option("--null", null_value, "null value of the t-test mean (or mean difference)");
  app.add_flag("--no-intercept", no_intercept, "omit the intercept; the first factor is then fully dummy coded");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  if (!data.empty()) cfg.data = data;
  if (!stats.empty()) cfg.stats = stats;
  if (!imputations.empty()) cfg.imputations = imputations;
  if (!group.empty()) cfg.group = group;
  if (!hypothesis.empty()) cfg.hypothesis = hypothesis;
  if (null_opt->count() > 0) cfg.null_value = null_value;
  cfg.outcomes = split_list(outcome);
  cfg.predictors = split_list(predictors);
  cfg.intercept = !no_intercept;

  try {
    for (const auto& w : split_list(prior)) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(w, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != w.size()) throw cbf::DataError(fmt::format("--prior: '{}' is not a number", w));
      cfg.prior_weights.push_back(v);
    }
    const cbf::ResultDocument doc = cbf::run(cfg);
    std::cout << (format == "json" ? cbf::render_json(doc) : cbf::render_text(doc));
    return kOk;
  } catch (const cbf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n  " << hypothesis << "\n  " << std::string(e.position(), ' ') << "^\n";
    return kParse;
  } catch (const cbf::HypothesisError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const cbf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const cbf::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
}
