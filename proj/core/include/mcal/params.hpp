#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mcal {

/// Units helpers. Everything internal is SI; conversions happen at I/O
/// boundaries only.
namespace units {
inline constexpr double kMphPerMps = 2.236936;
inline constexpr double kMetersPerMile = 1609.344;
inline double mps_to_mph(double v) { return v * kMphPerMps; }
inline double per_meter_to_per_mile(double rho) { return rho * kMetersPerMile; }
inline double per_sec_to_per_hour(double q) { return q * 3600.0; }
}  // namespace units

/// Which parameters are free in a calibration run.
enum class ParamSubset { CarFollowing, LaneChange, Both };

/// The ten behavioral parameters of a homogeneous fleet: five longitudinal
/// (car-following) and five lateral (lane-change motivation scales).
/// The acceleration exponent is a fixed model constant.
struct ParameterSet {
  // car-following
  double vf = 32.0;    // free-flow speed [m/s]
  double sj = 2.5;     // jam space gap [m]
  double tau = 1.0;    // desired time headway [s]
  double a = 2.6;      // maximum acceleration [m/s^2]
  double b = 4.5;      // desired deceleration [m/s^2]
  // lane-change motivation scales, dimensionless
  double lcStrategic = 1.0;
  double lcCooperative = 1.0;
  double lcAssertive = 1.0;
  double lcSpeedGain = 1.0;
  double lcKeepRight = 1.0;

  static constexpr double kDelta = 4.0;            // acceleration exponent
  static constexpr double kEmergencyDecel = 8.0;   // [m/s^2], lower clamp
  static constexpr std::size_t kNumParams = 10;
  static constexpr std::size_t kNumCf = 5;
  static constexpr std::size_t kNumLc = 5;

  /// Canonical vector layout: [vf, sj, tau, a, b,
  ///   lcStrategic, lcCooperative, lcAssertive, lcSpeedGain, lcKeepRight].
  std::array<double, kNumParams> to_vector() const;
  static ParameterSet from_vector(const std::array<double, kNumParams>& v);
  static const char* name(std::size_t index);

  /// Table of defaults used when a parameter is held fixed.
  static ParameterSet defaults();
  /// The parameter set used to generate synthetic ground-truth data.
  static ParameterSet ground_truth();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const ParameterSet&) const = default;
};

/// Per-parameter closed calibration intervals plus a free/fixed mask.
struct ParameterBounds {
  std::array<double, ParameterSet::kNumParams> lower{};
  std::array<double, ParameterSet::kNumParams> upper{};
  std::array<bool, ParameterSet::kNumParams> free{};

  /// Calibration ranges for the synthetic scenario.
  static ParameterBounds synthetic_ranges();

  /// Restrict the free mask to a subset (CF-only frees 5, LC-only 5, Both 10).
  ParameterBounds with_subset(ParamSubset subset) const;

  std::size_t num_free() const;
  /// Indices (into the canonical layout) of free parameters, ascending.
  std::vector<std::size_t> free_indices() const;

  /// Embed a free-parameter vector into a full ParameterSet, pinning fixed
  /// parameters at `fixed`'s values.
  ParameterSet embed(const std::vector<double>& free_values,
                     const ParameterSet& fixed) const;
  /// Extract the free coordinates of `p` in ascending index order.
  std::vector<double> extract(const ParameterSet& p) const;

  void validate() const;
};

}  // namespace mcal
