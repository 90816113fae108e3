#include "mcal/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace mcal {

const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::Flow: return "flow";
    case Quantity::Speed: return "speed";
    case Quantity::Occupancy: return "occupancy";
    case Quantity::Density: return "density";
  }
  return "?";
}

Quantity quantity_from_string(const std::string& s) {
  if (s == "flow" || s == "q") return Quantity::Flow;
  if (s == "speed" || s == "v") return Quantity::Speed;
  if (s == "occupancy" || s == "occ" || s == "o") return Quantity::Occupancy;
  if (s == "density" || s == "rho") return Quantity::Density;
  throw std::invalid_argument("unknown quantity: " + s);
}

namespace {
// Extracts a cell value in reporting units, or "missing".
bool cell_value(const MeasCell& c, Quantity z, double& out) {
  switch (z) {
    case Quantity::Flow:
      if (!c.flow_valid) return false;
      out = c.flow;  // already vph
      return true;
    case Quantity::Speed:
      if (!c.speed_valid) return false;
      out = units::mps_to_mph(c.speed);
      return true;
    case Quantity::Occupancy:
      if (!c.occ_valid) return false;
      out = c.occ;
      return true;
    case Quantity::Density: {
      const auto rho = cell_density(c);
      if (!rho) return false;
      out = units::per_meter_to_per_mile(*rho);
      return true;
    }
  }
  return false;
}
}  // namespace

double rmse_detectors(const MeasurementGrid& obs, const MeasurementGrid& sim,
                      Quantity z) {
  if (!obs.same_geometry(sim))
    throw std::invalid_argument("rmse_detectors: grids have mismatched geometry");
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t d = 0; d < obs.detectors.size(); ++d) {
    const auto& od = obs.detectors[d];
    const auto& sd = sim.detectors[d];
    for (std::size_t i = 0; i < od.cells.size(); ++i) {
      double a, b;
      if (!cell_value(od.cells[i], z, a) || !cell_value(sd.cells[i], z, b))
        continue;  // cells missing in either grid are excluded
      sq += (a - b) * (a - b);
      ++n;
    }
  }
  if (n == 0)
    throw std::invalid_argument("rmse_detectors: no overlapping valid cells");
  return std::sqrt(sq / static_cast<double>(n));
}

double rmse_macro(const MacroField& obs, const MacroField& sim, Quantity z) {
  if (z == Quantity::Occupancy)
    throw std::invalid_argument("rmse_macro: occupancy is not a macro quantity");
  if (!(obs.grid == sim.grid))
    throw std::invalid_argument("rmse_macro: grid specs differ");
  double sq = 0.0;
  std::size_t n = 0;
  const std::size_t cells = obs.grid.nx() * obs.grid.nt();
  for (std::size_t i = 0; i < cells; ++i) {
    if (!obs.valid[i] || !sim.valid[i]) continue;
    double a = 0.0, b = 0.0;
    switch (z) {
      case Quantity::Flow:
        a = units::per_sec_to_per_hour(obs.flow[i]);
        b = units::per_sec_to_per_hour(sim.flow[i]);
        break;
      case Quantity::Speed:
        a = units::mps_to_mph(obs.speed[i]);
        b = units::mps_to_mph(sim.speed[i]);
        break;
      case Quantity::Density:
        a = units::per_meter_to_per_mile(obs.density[i]);
        b = units::per_meter_to_per_mile(sim.density[i]);
        break;
      default: break;
    }
    sq += (a - b) * (a - b);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("rmse_macro: no overlapping valid cells");
  return std::sqrt(sq / static_cast<double>(n));
}

double objective(const MeasurementGrid& obs, const ScenarioConfig& scenario,
                 const ParameterSet& theta, Quantity z) {
  try {
    const TrajectoryLog traj = run(scenario, theta);
    const MeasurementGrid sim = simulate_detectors(traj, scenario.detectors);
    return rmse_detectors(obs, sim, z);
  } catch (const CollisionError&) {
    return kSimFaultPenalty;
  }
}

}  // namespace mcal
