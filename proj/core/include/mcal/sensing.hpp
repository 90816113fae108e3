#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcal/microsim.hpp"
#include "mcal/scenario.hpp"

namespace mcal {

/// One detector-lane-interval cell. Quantities carry individual missing
/// flags: an interval with no crossings has a valid zero flow but no speed
/// or occupancy.
struct MeasCell {
  double flow = 0.0;   // [veh/h]
  double speed = 0.0;  // time-mean speed [m/s]
  double occ = 0.0;    // [%]
  bool flow_valid = false;
  bool speed_valid = false;
  bool occ_valid = false;
};

struct DetectorSeries {
  double position = 0.0;
  std::vector<int> lanes;
  std::vector<MeasCell> cells;  // lane-major: cells[lane_idx * nint + interval]

  MeasCell& at(std::size_t lane_idx, std::size_t interval, std::size_t nint) {
    return cells[lane_idx * nint + interval];
  }
  const MeasCell& at(std::size_t lane_idx, std::size_t interval,
                     std::size_t nint) const {
    return cells[lane_idx * nint + interval];
  }
};

/// Lane-level aggregated detector measurements over uniform intervals.
struct MeasurementGrid {
  double window = 0.0;          // aggregation window [s]
  std::size_t num_intervals = 0;
  std::vector<DetectorSeries> detectors;

  void validate() const;
  bool same_geometry(const MeasurementGrid& other) const;
};

/// Point-detector simulation over trajectories. Crossing times and speeds
/// come from linear interpolation between samples; occupancy is vehicle
/// length over crossing speed. All specs must share one aggregation window.
MeasurementGrid simulate_detectors(const TrajectoryLog& traj,
                                   const std::vector<DetectorSpec>& specs);

/// CSV schema: time_s, position_m, lane, flow_vph, speed_mps, occupancy_pct.
/// Missing values are empty fields. Round-trips with export_measurements.
MeasurementGrid ingest_measurements(const std::string& path);
MeasurementGrid parse_measurements(const std::string& text);
std::string measurements_to_csv(const MeasurementGrid& grid);
void export_measurements(const MeasurementGrid& grid, const std::string& path);

/// Re-aggregates to a coarser window (integer multiple of the current one).
/// Flow averages; speed averages weighted by counts; occupancy by time.
MeasurementGrid aggregate(const MeasurementGrid& grid, double new_window);

/// Density rho = q/v per cell [veh/m]; zero flow gives zero density,
/// missing or zero speed gives a missing value.
std::optional<double> cell_density(const MeasCell& cell);

}  // namespace mcal
