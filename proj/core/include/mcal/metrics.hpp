#pragma once

#include <string>

#include "mcal/macro.hpp"
#include "mcal/params.hpp"
#include "mcal/scenario.hpp"
#include "mcal/sensing.hpp"

namespace mcal {

/// Measurement quantity for goodness-of-fit. Occupancy only exists on
/// detector grids; density on macro fields or derived from q/v.
enum class Quantity { Flow, Speed, Occupancy, Density };

const char* quantity_name(Quantity q);
Quantity quantity_from_string(const std::string& s);

/// Objective value returned when a candidate parameter set makes the
/// simulation fault, so the optimizer keeps a full population.
inline constexpr double kSimFaultPenalty = 1e9;

/// Element-wise RMSE over detector cells valid in both grids, reported in
/// conventional units: vph (flow), mph (speed), % (occupancy),
/// veh/mile (density). Throws on mismatched geometry or empty overlap.
double rmse_detectors(const MeasurementGrid& obs, const MeasurementGrid& sim,
                      Quantity z);

/// Element-wise RMSE over macro cells valid in both fields; same reporting
/// units (flow vphpl, speed mph, density veh/mile/lane).
double rmse_macro(const MacroField& obs, const MacroField& sim, Quantity z);

/// The calibration objective: simulate with theta, sense, compare.
/// Deterministic given the scenario seed; simulation faults map to
/// kSimFaultPenalty.
double objective(const MeasurementGrid& obs, const ScenarioConfig& scenario,
                 const ParameterSet& theta, Quantity z);

}  // namespace mcal
