#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcal/params.hpp"

namespace mcal {

/// On-ramp joining the mainline through an acceleration lane that exists
/// over [merge_start, merge_end]. The acceleration lane carries its own
/// global lane index (above the mainline lanes, physically on the right).
struct OnRamp {
  double merge_start = 0.0;  // [m]
  double merge_end = 0.0;    // [m]
  int accel_lane = -1;       // global lane index of the acceleration lane
};

struct OffRamp {
  double position = 0.0;  // diverge point [m]
  int exit_lane = 0;      // lane the vehicle must occupy to exit
};

/// One mainline segment with on/off ramps. Mainline lanes are indexed
/// 0..mainline_lanes-1 with 0 the rightmost; acceleration lanes sit above
/// that range and exist only inside their merge zone.
struct RoadNetwork {
  double length = 0.0;  // [m]
  int mainline_lanes = 0;
  std::vector<OnRamp> onramps;
  std::vector<OffRamp> offramps;

  int lanes_at(double x) const;
  bool lane_exists(int lane, double x) const;
  /// True for acceleration-lane indices (discretionary changes into these
  /// are not allowed).
  bool is_accel_lane(int lane) const { return lane >= mainline_lanes; }

  void validate() const;
};

/// Piecewise-constant arrival rates per origin. Origin 0 is the upstream
/// mainline; origin 1+k is on-ramp k.
struct DemandProfile {
  double bin_width = 0.0;                        // [s]
  std::vector<double> mainline_rates;            // [veh/h] per bin
  std::vector<std::vector<double>> onramp_rates; // per ramp, per bin
  std::vector<double> offramp_splits;            // turning fraction per off-ramp

  std::size_t num_origins() const { return 1 + onramp_rates.size(); }
  double rate_at(std::size_t origin, double t) const;
  void validate(double horizon, std::size_t num_onramps,
                std::size_t num_offramps) const;
};

struct DetectorSpec {
  double position = 0.0;    // [m]
  std::vector<int> lanes;   // covered lane indices; empty = all at position
  double window = 50.0;     // aggregation window [s]
};

/// Everything that defines a simulation run except the behavioral
/// parameters under calibration.
struct ScenarioConfig {
  RoadNetwork network;
  DemandProfile demand;
  std::vector<DetectorSpec> detectors;
  double horizon = 0.0;        // [s]
  double dt = 0.1;             // [s]
  std::uint64_t seed = 1;
  ParameterSet defaults;
  double vehicle_length = 5.0; // [m]

  void validate() const;
};

/// Parses and validates the sectioned scenario file format
/// (see docs/scenario_format.md). Throws std::runtime_error on parse
/// failures and std::invalid_argument on invariant violations.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& text);
std::string serialize_scenario(const ScenarioConfig& sc);
void save_scenario(const ScenarioConfig& sc, const std::string& path);

/// The synthetic on-ramp merge corridor: 1300 m mainline, 2 lanes plus an
/// acceleration lane over 800-1100 m, detectors at 700/900/1150 m with 50 s
/// windows, 8 min horizon.
ScenarioConfig build_synthetic_merge();

/// Homogeneous Poisson arrivals per demand bin, sorted ascending,
/// deterministic given seed. Origin 0 = mainline, 1+k = on-ramp k.
std::vector<double> sample_arrivals(const DemandProfile& demand,
                                    std::size_t origin, double horizon,
                                    std::uint64_t seed);

}  // namespace mcal
