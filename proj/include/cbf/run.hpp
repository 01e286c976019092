#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cbf/adapters.hpp"
#include "cbf/report.hpp"

namespace cbf {

struct RunConfig {
  std::optional<std::string> data;         // CSV file
  std::optional<std::string> stats;        // sufficient-statistics JSON file
  std::optional<std::string> imputations;  // directory of imputed CSV files
  std::string test;                        // may be empty when the stats file names it
  std::vector<std::string> outcomes;
  std::vector<std::string> predictors;
  std::optional<std::string> group;
  std::optional<std::string> hypothesis;
  std::vector<double> prior_weights;  // empty = equal weights
  std::uint64_t seed = kDefaultSeed;
  std::size_t draws = 100000;
  bool intercept = true;
  std::optional<double> null_value;
};

inline std::vector<std::string> csv_files_in(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(fmt::format("'{}' is not a directory", dir));
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError(fmt::format("no .csv files in '{}'", dir));
  return out;
}

/// One PosteriorSpec per dataset (several when imputed datasets are given).
inline std::vector<PosteriorSpec> build_specs(const RunConfig& cfg, const EngineOptions& opt) {
  const int sources = static_cast<int>(cfg.data.has_value()) + static_cast<int>(cfg.stats.has_value()) +
                      static_cast<int>(cfg.imputations.has_value());
  if (sources != 1) throw DataError("give exactly one of --data, --stats or --imputations");
  std::vector<PosteriorSpec> specs;
  if (cfg.stats) {
    std::ifstream in(*cfg.stats);
    if (!in) throw DataError(fmt::format("cannot open '{}'", *cfg.stats));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("'{}' is not valid JSON: {}", *cfg.stats, e.what()));
    }
    std::string test = cfg.test;
    if (j.contains("test")) {
      const auto named = j.at("test").get<std::string>();
      if (!test.empty() && test != named) throw DataError(fmt::format("--test {} conflicts with the file's test '{}'", test, named));
      test = named;
    }
    if (test.empty()) throw DataError("--test is required");
    specs.push_back(spec_from_stats(j, test, opt, cfg.null_value));
    return specs;
  }
  if (cfg.test.empty()) throw DataError("--test is required");
  const CsvModel model{cfg.outcomes, cfg.predictors, cfg.group, cfg.intercept, cfg.null_value};
  const std::vector<std::string> files = cfg.data ? std::vector<std::string>{*cfg.data} : csv_files_in(*cfg.imputations);
  for (const auto& f : files) specs.push_back(spec_from_csv(read_csv(f), cfg.test, model, opt));
  return specs;
}

inline ResultDocument run(const RunConfig& cfg) {
  if (cfg.draws < 1000) throw DataError("--draws must be at least 1000");
  const EngineOptions opt{cfg.seed, cfg.draws};
  const auto specs = build_specs(cfg, opt);

  ResultDocument doc;
  const auto info = info_of(specs.front());
  doc.object = info.object;
  doc.parameter = info.parameter;
  doc.method = info.method;
  doc.seed = cfg.seed;
  doc.draws = cfg.draws;
  doc.imputations = cfg.imputations ? specs.size() : 0;

  std::vector<ExploratoryTable> explo;
  for (const auto& ps : specs) explo.push_back(exploratory(ps, opt));
  doc.exploratory = to_block(explo.size() == 1 ? explo.front() : aggregate_imputations(explo));

  if (cfg.hypothesis) {
    const auto& space = space_of(specs.front());
    auto hyps = parse(*cfg.hypothesis, space);
    doc.warnings = warn_nested_orders(hyps);
    HypothesisSystem sys = add_complement(std::move(hyps), space);
    if (!cfg.prior_weights.empty()) set_prior_weights(sys, cfg.prior_weights);
    std::vector<MeasureTable> tables;
    for (const auto& ps : specs) {
      if (space_of(ps).names() != space.names()) throw DataError("imputed datasets produced different parameters");
      tables.push_back(confirmatory(ps, sys, opt));
    }
    doc.confirmatory = to_block(tables.size() == 1 ? tables.front() : aggregate_imputations(tables));
  }
  return doc;
}

}  // namespace cbf
