#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelfe/core.hpp"
#include "panelfe/dgp.hpp"
#include "panelfe/estimators.hpp"

namespace panelfe {

// The inference menu: point estimator + interval construction.
enum class Option { FeCcm, Hk, HpjCcm, HpjFeb, HpjHpjb, HpjHpjpb };

std::string option_name(Option o);
Option option_from_name(const std::string& name);

struct ExperimentConfig {
  DgpSpec dgp;
  LagSpec fit;                            // empty -> default_fit(dgp)
  std::vector<std::pair<int, int>> grid;  // (n, T) cells
  int reps = 0;
  std::vector<Option> options;
  int bootstrap_B = 1000;
  double level = 0.95;
  std::uint64_t master_seed = 1;
  int coord = 0;                 // scored coordinate
  std::optional<double> beta0;   // override for the scored coordinate

  void validate() const;
  LagSpec effective_fit() const;

  static ExperimentConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct OptionStats {
  Option option = Option::FeCcm;
  double bias = 0.0;      // mean(estimate) - beta0
  double sd = 0.0;        // SD of estimates across replications
  double se_mean = 0.0;   // mean reported standard error
  double se_ratio = 0.0;  // se_mean / sd
  double coverage = 0.0;

  bool operator==(const OptionStats&) const = default;
};

struct McCell {
  int n = 0, T = 0;
  double beta0 = 0.0;
  int failures = 0;
  std::vector<OptionStats> rows;

  bool operator==(const McCell&) const = default;
};

struct McResult {
  double level = 0.95;
  int reps = 0;
  int bootstrap_B = 0;
  std::uint64_t master_seed = 0;
  std::vector<McCell> cells;

  bool operator==(const McResult&) const = default;
};

// Scored pseudo-true value for a config (override, closed form, or long-run
// simulation, in that order).
double scored_beta0(const ExperimentConfig& cfg);

McResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  Method method = Method::FE;
  int n = 0, T = 0;
  double bias = 0.0;
  double rmse = 0.0;
};

// Bias/RMSE of FE and HPJ across the grid (no bootstrap work).
std::vector<SweepRow> sweep_T(const ExperimentConfig& cfg);

enum class ReportFormat { Csv, Markdown };

std::string emit_report(const McResult& res, ReportFormat format);
McResult parse_report_csv(const std::string& csv);

}  // namespace panelfe
