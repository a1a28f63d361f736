#pragma once

#include "parity/model.hpp"
#include "parity/panel.hpp"
#include "parity/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace parity {

struct MajorityLabel {
  std::string unit_id;
  Group label = Group::White;
  bool protected_group = false;  // every label except White
};

MajorityLabel majority_label(const UnitRecord& unit);

/// Units per majority label, all four labels present (possibly zero).
std::map<Group, std::size_t> label_counts(std::span<const UnitRecord> units);

struct UnitError {
  std::string unit_id;
  Group label = Group::White;
  std::int64_t population = 1;
  std::size_t rows = 0;     // (window, lookahead) rows averaged
  double mean_pbl = 0.0;    // case units
  double norm_pbl = 0.0;    // per 1,000 persons
};

/// One value per unit, keyed by group name ("Asian", ...).
struct AggregatedErrors {
  std::vector<UnitError> units;
  GroupedSamples norm_pbl_by_group;
  GroupedSamples pbl_by_group;
};

/// Per unit: mean quantile-averaged pbl over its test rows, then NormPBL.
/// `forecasts[i]` must belong to `windows[i]`. Every unit in `units` needs at
/// least one test window, else Error(MissingUnit).
AggregatedErrors aggregate_norm_errors(std::span<const WindowSample> windows,
                                       std::span<const QuantileForecast> forecasts,
                                       std::span<const double> quantiles, std::span<const UnitRecord> units);

struct HardParity {
  AnovaResult anova;
  std::vector<TukeyPair> tukey;
};

/// ANOVA then Tukey HSD, pairs flagged at 0.01 and 0.1.
HardParity hard_parity(const GroupedSamples& grouped);

struct SoftParity {
  std::map<std::string, double> aer;       // protected labels only
  std::map<std::string, double> distance;  // |1 - aer|
};

/// AER_g = mean(g) / mean(White) for each protected label present. Throws
/// Error(Degenerate) when White is missing or its mean is 0.
SoftParity soft_parity(const GroupedSamples& grouped);

struct ParityReport {
  std::string method;
  AnovaResult anova;
  std::vector<TukeyPair> tukey;
  std::map<std::string, double> aer;
  std::map<std::string, double> distance;
  std::map<std::string, double> mean_norm_pbl_per_group;
  std::map<std::string, double> mean_pbl_per_group;
  std::map<std::string, std::size_t> units_per_group;
  std::vector<UnitError> units;  // not part of report.json
  std::string config_hash;
  std::uint64_t seed = 0;
};

ParityReport build_report(const std::string& method, const AggregatedErrors& errors);

/// Forward pass over the test windows, then build_report.
ParityReport audit_model(const TrainedModel& model, std::span<const WindowSample> test_windows,
                         std::span<const UnitRecord> units);

std::string report_json(const ParityReport& report);
ParityReport report_from_json(const std::string& text);

/// Writes anova.csv, tukey.csv, soft_parity.csv and mean_pbl.csv into
/// `out_dir` with one column block per report, plus <method>/report.json per
/// report, and <method>/unit_errors.csv when the report carries per-unit
/// rows. Throws Error(Io) when a file cannot be written.
void emit_report(std::span<const ParityReport> reports, const std::filesystem::path& out_dir);

}  // namespace parity
