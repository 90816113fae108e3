#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mcal/macro.hpp"
#include "mcal/metrics.hpp"
#include "mcal/optimizer.hpp"
#include "mcal/params.hpp"
#include "mcal/scenario.hpp"
#include "mcal/sensing.hpp"

namespace mcal {

/// Experiment labels: 1/2/3 select the free-parameter subset (CF, LC, both),
/// a/b/c the calibration quantity (flow, speed, occupancy).
std::string experiment_label(ParamSubset subset, Quantity quantity);
std::pair<ParamSubset, Quantity> parse_experiment_label(const std::string& label);
std::vector<std::string> matrix_labels();

struct ExperimentSpec {
  ParamSubset subset = ParamSubset::Both;
  Quantity quantity = Quantity::Speed;
  std::string label;
  DEConfig de;
  ScenarioConfig scenario;
  MeasurementGrid observed;
  std::optional<MacroField> validation;
  ParameterBounds bounds = ParameterBounds::synthetic_ranges();
  /// Simulation seed used during calibration; fixed across candidate
  /// evaluations and by default distinct from the data-generating seed.
  std::uint64_t calibration_seed = 0;
  GridSpec macro_grid{0, 0, 10.0, 10.0};

  void validate() const;
  static ExperimentSpec make(const std::string& label,
                             const ScenarioConfig& scenario,
                             const MeasurementGrid& observed,
                             const DEConfig& de);
};

struct RmseTriple {
  double flow = 0.0;   // vph
  double speed = 0.0;  // mph
  double density = 0.0;  // veh/mile
};

struct CalibrationReport {
  std::string label;
  ParameterSet calibrated;
  OptResult opt;
  RmseTriple detector;
  RmseTriple macro;
  RmseTriple baseline_detector;
  RmseTriple baseline_macro;
  std::uint64_t data_seed = 0;
  std::uint64_t calibration_seed = 0;
  bool has_macro = false;
  bool trivial = false;  // degenerate (e.g. zero demand) run
  std::string error;     // non-empty when a matrix cell failed
};

/// Builds the objective over the free-parameter box with the remaining
/// parameters pinned at the scenario defaults. Returns the callable plus the
/// matching bounds and the default-parameter seed vector.
struct BoundObjective {
  Objective f;
  Bounds box;
  std::vector<double> default_vector;
  ParameterBounds mask;
};
BoundObjective make_objective(const ExperimentSpec& spec);

CalibrationReport run_experiment(const ExperimentSpec& spec);

/// The nine-cell experiment matrix. Failed cells carry an error string;
/// the rest proceed. `jobs` bounds cell-level parallelism.
std::vector<CalibrationReport> run_matrix(const ScenarioConfig& scenario,
                                          const MeasurementGrid& observed,
                                          const std::optional<MacroField>& validation,
                                          const DEConfig& base_de,
                                          std::size_t jobs = 1);

/// Results CSV: one row per experiment with both RMSE families plus the
/// default-parameter baseline row.
std::string reports_to_csv(const std::vector<CalibrationReport>& reports);
void save_reports(const std::vector<CalibrationReport>& reports,
                  const std::string& path);

}  // namespace mcal
