#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcal/microsim.hpp"
#include "mcal/sensing.hpp"

namespace mcal {

/// Uniform spatiotemporal grid over [0,L] x [0,T].
struct GridSpec {
  double length = 0.0;  // [m]
  double horizon = 0.0; // [s]
  double dx = 10.0;     // [m]
  double dt = 10.0;     // [s]

  std::size_t nx() const;
  std::size_t nt() const;
  void validate() const;
  bool operator==(const GridSpec&) const = default;
};

/// Macroscopic flow/density/speed fields, per lane. Cell index is
/// space-major: cell(ix, it) = ix * nt + it.
struct MacroField {
  GridSpec grid;
  std::vector<double> flow;     // [veh/s per lane]
  std::vector<double> density;  // [veh/m per lane]
  std::vector<double> speed;    // space-mean [m/s]
  std::vector<std::uint8_t> valid;

  std::size_t index(std::size_t ix, std::size_t it) const {
    return ix * grid.nt() + it;
  }
  void validate() const;
};

/// Raw Edie accumulators: total distance traveled and total time spent per
/// cell, summed over all lanes (not yet lane-normalized).
struct EdieTotals {
  GridSpec grid;
  std::vector<double> dist;  // [m]
  std::vector<double> time;  // [s]
};

EdieTotals edie_accumulate(const TrajectoryLog& traj, const GridSpec& grid);

/// Edie's generalized definitions per cell: q = d(A)/|A|, rho = t(A)/|A|,
/// v = d(A)/t(A), divided by the cell's lane count for per-lane units.
/// Cells with no vehicle time are flagged invalid.
MacroField edie_fields(const TrajectoryLog& traj, const GridSpec& grid,
                       const std::function<int(double)>& lanes_at);
MacroField edie_fields(const TrajectoryLog& traj, const GridSpec& grid,
                       const RoadNetwork& network);

/// One scattered observation for kernel smoothing.
struct KernelPoint {
  double x = 0.0;
  double t = 0.0;
  double value = 0.0;
};

/// Exponential kernel average of scattered data along characteristic speed c:
/// weight exp(-|dx|/sigma - |dt - dx/c|/tau). Returns 0 with zero total
/// weight flagged through `weight_out` when provided.
double kernel_average(const std::vector<KernelPoint>& points, double x, double t,
                      double c, double sigma, double tau,
                      double* weight_out = nullptr);

/// Anisotropic kernel parameters for traffic state reconstruction. The
/// physical defaults use c_free > 0 > c_cong; equal wave speeds are accepted
/// and collapse the blend to a single kernel.
struct AsmParams {
  double c_free = 21.4;   // free-flow wave speed [m/s]
  double c_cong = -4.5;   // congested wave speed [m/s]
  double sigma = 300.0;   // spatial kernel width [m]
  double tau_k = 25.0;    // temporal kernel width [s]
  double v_thr = 15.6;    // crossover speed [m/s]
  double dv = 4.5;        // transition width [m/s]

  void validate() const;
  /// sigma = half the mean detector spacing, tau_k = half the window.
  static AsmParams defaults_for(const MeasurementGrid& grid);
};

/// Adaptive-smoothing reconstruction of v and q from sparse detector cells,
/// blending free-flow and congested wave directions; rho derived as q/v.
MacroField asm_reconstruct(const MeasurementGrid& grid_in, const GridSpec& grid,
                           const AsmParams& p);

/// Detector-level density via rho = q/v.
struct DensitySeries {
  double position = 0.0;
  std::vector<int> lanes;
  std::vector<double> rho;           // [veh/m], lane-major like MeasCell
  std::vector<std::uint8_t> valid;
};
std::vector<DensitySeries> density_from_grid(const MeasurementGrid& grid);

/// CSV: t_s, x_m, q_vphpl, rho_vpmpl, v_mph, valid. Reporting units.
std::string macro_to_csv(const MacroField& field);
void export_macro(const MacroField& field, const std::string& path);
MacroField parse_macro_csv(const std::string& text);
MacroField load_macro(const std::string& path);

enum class MacroQuantity { Flow, Density, Speed };

/// Binary PPM heatmap, time on the horizontal axis, space on the vertical
/// (upstream at the bottom row). Values map linearly onto a blue-to-red
/// palette over [lo, hi]; invalid cells render as the reserved gray.
std::string heatmap_ppm(const MacroField& field, MacroQuantity q, double lo,
                        double hi);
void export_heatmap(const MacroField& field, MacroQuantity q, double lo,
                    double hi, const std::string& path);

}  // namespace mcal
