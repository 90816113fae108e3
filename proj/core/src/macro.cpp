#include "mcal/macro.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mcal/io.hpp"

namespace mcal {

std::size_t GridSpec::nx() const {
  return static_cast<std::size_t>(std::ceil(length / dx - 1e-9));
}

std::size_t GridSpec::nt() const {
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

void GridSpec::validate() const {
  if (!(length > 0) || !(horizon > 0))
    throw std::invalid_argument("grid extents must be positive");
  if (!(dx > 0) || !(dt > 0))
    throw std::invalid_argument("grid cell sizes must be positive");
}

void MacroField::validate() const {
  const std::size_t n = grid.nx() * grid.nt();
  if (flow.size() != n || density.size() != n || speed.size() != n ||
      valid.size() != n)
    throw std::invalid_argument("macro field size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    if (!(flow[i] >= 0) || !(density[i] >= 0))
      throw std::invalid_argument("macro field has negative flow or density");
    if (density[i] > 0) {
      const double rel = std::abs(flow[i] - density[i] * speed[i]) /
                         std::max(flow[i], 1e-300);
      if (rel > 1e-9)
        throw std::invalid_argument("macro field violates q = rho * v");
    }
  }
}

EdieTotals edie_accumulate(const TrajectoryLog& traj, const GridSpec& grid) {
  grid.validate();
  EdieTotals tot;
  tot.grid = grid;
  const std::size_t nx = grid.nx(), nt = grid.nt();
  tot.dist.assign(nx * nt, 0.0);
  tot.time.assign(nx * nt, 0.0);

  // Coordinates a hair below a cell boundary (floating-point residue of the
  // walk below) belong to the next cell; without the nudge the walker can
  // advance by only an ulp per iteration.
  constexpr double kEps = 1e-9;

  auto deposit = [&](double t0, double t1, double x0, double x1) {
    // One constant-speed segment clipped to the grid. Recursion-free: walk
    // time cells, then space cells within each.
    if (t1 <= t0) return;
    const double speed = (x1 - x0) / (t1 - t0);
    double t = std::max(t0, 0.0);
    const double t_end = std::min(t1, grid.horizon);
    while (t < t_end - kEps) {
      const auto it =
          std::min(static_cast<std::size_t>((t + kEps) / grid.dt), nt - 1);
      const double t_cell_end = std::min((it + 1) * grid.dt, t_end);
      // clip by space within [t, t_cell_end]
      double ta = t, tb = t_cell_end;
      double xa = x0 + speed * (ta - t0);
      while (ta < tb - kEps) {
        if (xa >= grid.length - kEps) break;
        if (speed <= 1e-12) {
          // standing still inside one space cell
          if (xa >= 0) {
            const auto ix =
                std::min(static_cast<std::size_t>(xa / grid.dx), nx - 1);
            tot.time[ix * nt + it] += tb - ta;
          }
          break;
        }
        if (xa < 0) {
          const double t_enter = ta + (0.0 - xa) / speed;
          if (t_enter >= tb) break;
          ta = t_enter;
          xa = 0.0;
          continue;
        }
        const auto ix =
            std::min(static_cast<std::size_t>((xa + kEps) / grid.dx), nx - 1);
        const double x_cell_end = std::min((ix + 1) * grid.dx, grid.length);
        const double t_exit = ta + (x_cell_end - xa) / speed;
        const double seg_end = std::min(t_exit, tb);
        const double dur = std::max(seg_end - ta, 0.0);
        tot.time[ix * nt + it] += dur;
        tot.dist[ix * nt + it] += speed * dur;
        ta = std::max(seg_end, ta + kEps * 1e-3);  // guaranteed forward progress
        xa = x0 + speed * (ta - t0);
      }
      t = t_cell_end;
    }
  };

  for (const auto& trace : traj.vehicles)
    for (std::size_t k = 1; k < trace.samples.size(); ++k)
      deposit(trace.samples[k - 1].t, trace.samples[k].t,
              trace.samples[k - 1].position, trace.samples[k].position);
  return tot;
}

MacroField edie_fields(const TrajectoryLog& traj, const GridSpec& grid,
                       const std::function<int(double)>& lanes_at) {
  const EdieTotals tot = edie_accumulate(traj, grid);
  MacroField f;
  f.grid = grid;
  const std::size_t nx = grid.nx(), nt = grid.nt();
  const std::size_t n = nx * nt;
  f.flow.assign(n, 0.0);
  f.density.assign(n, 0.0);
  f.speed.assign(n, 0.0);
  f.valid.assign(n, 0);
  for (std::size_t ix = 0; ix < nx; ++ix) {
    const double x_mid = std::min((ix + 0.5) * grid.dx, grid.length);
    const int lanes = std::max(1, lanes_at(x_mid));
    const double x1 = std::min((ix + 1) * grid.dx, grid.length);
    const double t1_max = grid.horizon;
    for (std::size_t it = 0; it < nt; ++it) {
      const std::size_t i = ix * nt + it;
      const double cell_dx = x1 - ix * grid.dx;
      const double cell_dt = std::min((it + 1) * grid.dt, t1_max) - it * grid.dt;
      const double area = cell_dx * cell_dt * lanes;
      if (tot.time[i] <= 0 || area <= 0) continue;
      f.valid[i] = 1;
      f.flow[i] = tot.dist[i] / area;
      f.density[i] = tot.time[i] / area;
      f.speed[i] = tot.dist[i] / tot.time[i];
    }
  }
  return f;
}

MacroField edie_fields(const TrajectoryLog& traj, const GridSpec& grid,
                       const RoadNetwork& network) {
  return edie_fields(traj, grid, [&network](double x) { return network.lanes_at(x); });
}

double kernel_average(const std::vector<KernelPoint>& points, double x, double t,
                      double c, double sigma, double tau, double* weight_out) {
  double wsum = 0.0, zsum = 0.0;
  for (const auto& pt : points) {
    const double ddx = pt.x - x;
    const double ddt = pt.t - t;
    const double arg = std::abs(ddx) / sigma + std::abs(ddt - ddx / c) / tau;
    if (arg > 30.0) continue;  // weight < 1e-13, numerically irrelevant
    const double w = std::exp(-arg);
    wsum += w;
    zsum += w * pt.value;
  }
  if (weight_out) *weight_out = wsum;
  return wsum > 0 ? zsum / wsum : 0.0;
}

void AsmParams::validate() const {
  if (c_free == 0.0 || c_cong == 0.0)
    throw std::invalid_argument("AsmParams: wave speeds must be nonzero");
  if (!(sigma > 0) || !(tau_k > 0) || !(dv > 0))
    throw std::invalid_argument("AsmParams: kernel widths must be positive");
}

AsmParams AsmParams::defaults_for(const MeasurementGrid& grid) {
  AsmParams p;
  p.tau_k = 0.5 * grid.window;
  if (grid.detectors.size() >= 2) {
    std::vector<double> pos;
    for (const auto& d : grid.detectors) pos.push_back(d.position);
    std::sort(pos.begin(), pos.end());
    double spacing = 0.0;
    for (std::size_t i = 1; i < pos.size(); ++i) spacing += pos[i] - pos[i - 1];
    spacing /= static_cast<double>(pos.size() - 1);
    p.sigma = 0.5 * spacing;
  }
  return p;
}

MacroField asm_reconstruct(const MeasurementGrid& grid_in, const GridSpec& grid,
                           const AsmParams& p) {
  grid.validate();
  p.validate();

  // Lane-averaged input points, separate clouds for speed and flow.
  std::vector<KernelPoint> v_points, q_points;
  for (const auto& d : grid_in.detectors) {
    for (std::size_t ti = 0; ti < grid_in.num_intervals; ++ti) {
      const double x = d.position;
      const double t = (ti + 0.5) * grid_in.window;
      double v_sum = 0.0, q_sum = 0.0;
      int v_n = 0, q_n = 0;
      for (std::size_t li = 0; li < d.lanes.size(); ++li) {
        const MeasCell& c = d.at(li, ti, grid_in.num_intervals);
        if (c.speed_valid) {
          v_sum += c.speed;
          ++v_n;
        }
        if (c.flow_valid) {
          q_sum += c.flow;
          ++q_n;
        }
      }
      if (v_n > 0) v_points.push_back({x, t, v_sum / v_n});
      if (q_n > 0) q_points.push_back({x, t, q_sum / q_n / 3600.0});  // veh/s per lane
    }
  }
  if (v_points.empty() || q_points.empty())
    throw std::invalid_argument("asm_reconstruct: need at least one valid speed and flow cell");

  MacroField f;
  f.grid = grid;
  const std::size_t nx = grid.nx(), nt = grid.nt();
  f.flow.assign(nx * nt, 0.0);
  f.density.assign(nx * nt, 0.0);
  f.speed.assign(nx * nt, 0.0);
  f.valid.assign(nx * nt, 0);

  for (std::size_t ix = 0; ix < nx; ++ix) {
    const double x = (ix + 0.5) * grid.dx;
    for (std::size_t it = 0; it < nt; ++it) {
      const double t = (it + 0.5) * grid.dt;
      const double v_free = kernel_average(v_points, x, t, p.c_free, p.sigma, p.tau_k);
      const double v_cong = kernel_average(v_points, x, t, p.c_cong, p.sigma, p.tau_k);
      const double q_free = kernel_average(q_points, x, t, p.c_free, p.sigma, p.tau_k);
      const double q_cong = kernel_average(q_points, x, t, p.c_cong, p.sigma, p.tau_k);
      const double w =
          0.5 * (1.0 + std::tanh((p.v_thr - std::min(v_free, v_cong)) / p.dv));
      const double v = w * v_cong + (1.0 - w) * v_free;
      const double q = w * q_cong + (1.0 - w) * q_free;
      const std::size_t i = ix * nt + it;
      f.speed[i] = v;
      f.flow[i] = q;
      if (v > 0) {
        f.density[i] = q / v;
        f.valid[i] = 1;
      }
    }
  }
  return f;
}

std::vector<DensitySeries> density_from_grid(const MeasurementGrid& grid) {
  std::vector<DensitySeries> out;
  for (const auto& d : grid.detectors) {
    DensitySeries s;
    s.position = d.position;
    s.lanes = d.lanes;
    s.rho.assign(d.cells.size(), 0.0);
    s.valid.assign(d.cells.size(), 0);
    for (std::size_t i = 0; i < d.cells.size(); ++i) {
      if (auto rho = cell_density(d.cells[i])) {
        s.rho[i] = *rho;
        s.valid[i] = 1;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string macro_to_csv(const MacroField& field) {
  std::ostringstream out;
  out.precision(10);
  out << "t_s,x_m,q_vphpl,rho_vpmpl,v_mph,valid\n";
  const std::size_t nx = field.grid.nx(), nt = field.grid.nt();
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t i = ix * nt + it;
      out << it * field.grid.dt << "," << ix * field.grid.dx << ","
          << units::per_sec_to_per_hour(field.flow[i]) << ","
          << units::per_meter_to_per_mile(field.density[i]) << ","
          << units::mps_to_mph(field.speed[i]) << ","
          << static_cast<int>(field.valid[i]) << "\n";
    }
  }
  return out.str();
}

void export_macro(const MacroField& field, const std::string& path) {
  io::atomic_write(path, macro_to_csv(field));
}

MacroField parse_macro_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty macro field file");
  struct Row {
    double t, x, q, rho, v;
    int valid;
  };
  std::vector<Row> rows;
  std::set<double> ts, xs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split_csv(line);
    const std::string ctx = "line " + std::to_string(lineno);
    if (f.size() != 6) throw std::runtime_error(ctx + ": expected 6 columns");
    Row r;
    r.t = io::parse_double(f[0], ctx);
    r.x = io::parse_double(f[1], ctx);
    r.q = io::parse_double(f[2], ctx);
    r.rho = io::parse_double(f[3], ctx);
    r.v = io::parse_double(f[4], ctx);
    r.valid = static_cast<int>(io::parse_long(f[5], ctx));
    rows.push_back(r);
    ts.insert(r.t);
    xs.insert(r.x);
  }
  if (rows.empty()) throw std::runtime_error("macro field file has no data rows");
  std::vector<double> tv(ts.begin(), ts.end()), xv(xs.begin(), xs.end());
  MacroField field;
  field.grid.dt = tv.size() >= 2 ? tv[1] - tv[0] : std::max(tv[0], 1.0);
  field.grid.dx = xv.size() >= 2 ? xv[1] - xv[0] : std::max(xv[0], 1.0);
  field.grid.horizon = tv.back() + field.grid.dt;
  field.grid.length = xv.back() + field.grid.dx;
  const std::size_t nx = field.grid.nx(), nt = field.grid.nt();
  field.flow.assign(nx * nt, 0.0);
  field.density.assign(nx * nt, 0.0);
  field.speed.assign(nx * nt, 0.0);
  field.valid.assign(nx * nt, 0);
  for (const auto& r : rows) {
    const auto it = static_cast<std::size_t>(std::llround(r.t / field.grid.dt));
    const auto ix = static_cast<std::size_t>(std::llround(r.x / field.grid.dx));
    if (ix >= nx || it >= nt) throw std::runtime_error("macro field cell out of range");
    const std::size_t i = ix * nt + it;
    field.flow[i] = r.q / 3600.0;
    field.density[i] = r.rho / units::kMetersPerMile;
    field.speed[i] = r.v / units::kMphPerMps;
    field.valid[i] = r.valid ? 1 : 0;
  }
  return field;
}

MacroField load_macro(const std::string& path) {
  return parse_macro_csv(io::read_file(path));
}

std::string heatmap_ppm(const MacroField& field, MacroQuantity q, double lo,
                        double hi) {
  if (!(hi > lo)) throw std::invalid_argument("heatmap scale needs hi > lo");
  const std::size_t nx = field.grid.nx(), nt = field.grid.nt();
  std::ostringstream out;
  out << "P6\n" << nt << " " << nx << "\n255\n";
  const std::vector<double>* values = nullptr;
  switch (q) {
    case MacroQuantity::Flow: values = &field.flow; break;
    case MacroQuantity::Density: values = &field.density; break;
    case MacroQuantity::Speed: values = &field.speed; break;
  }
  for (std::size_t row = 0; row < nx; ++row) {
    const std::size_t ix = nx - 1 - row;  // upstream at the bottom
    for (std::size_t it = 0; it < nt; ++it) {
      const std::size_t i = ix * nt + it;
      unsigned char rgb[3];
      if (!field.valid[i]) {
        rgb[0] = rgb[1] = rgb[2] = 128;  // reserved: invalid cells
      } else {
        double u = ((*values)[i] - lo) / (hi - lo);
        u = std::clamp(u, 0.0, 1.0);
        // blue (low) -> red (high)
        rgb[0] = static_cast<unsigned char>(255.0 * u);
        rgb[1] = static_cast<unsigned char>(64.0 * (1.0 - std::abs(2.0 * u - 1.0)));
        rgb[2] = static_cast<unsigned char>(255.0 * (1.0 - u));
      }
      out.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
  return out.str();
}

void export_heatmap(const MacroField& field, MacroQuantity q, double lo,
                    double hi, const std::string& path) {
  io::atomic_write(path, heatmap_ppm(field, q, lo, hi));
}

}  // namespace mcal
