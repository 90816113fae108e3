#include "mcal/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mcal/io.hpp"

namespace mcal {

void MeasurementGrid::validate() const {
  if (!(window > 0)) throw std::invalid_argument("measurement window must be > 0");
  for (const auto& d : detectors) {
    if (d.cells.size() != d.lanes.size() * num_intervals)
      throw std::invalid_argument("measurement grid cell count mismatch");
    for (const auto& c : d.cells) {
      if (c.flow_valid && !(c.flow >= 0))
        throw std::invalid_argument("flow must be >= 0");
      if (c.speed_valid && !(c.speed >= 0))
        throw std::invalid_argument("speed must be >= 0");
      if (c.occ_valid && !(c.occ >= 0 && c.occ <= 100))
        throw std::invalid_argument("occupancy must be in [0, 100]");
    }
  }
}

bool MeasurementGrid::same_geometry(const MeasurementGrid& other) const {
  if (std::abs(window - other.window) > 1e-9) return false;
  if (num_intervals != other.num_intervals) return false;
  if (detectors.size() != other.detectors.size()) return false;
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    if (std::abs(detectors[i].position - other.detectors[i].position) > 1e-6)
      return false;
    if (detectors[i].lanes != other.detectors[i].lanes) return false;
  }
  return true;
}

MeasurementGrid simulate_detectors(const TrajectoryLog& traj,
                                   const std::vector<DetectorSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("no detector specs");
  const double window = specs.front().window;
  for (const auto& s : specs) {
    if (std::abs(s.window - window) > 1e-9)
      throw std::invalid_argument("all detectors must share one aggregation window");
    if (traj.dt > s.window + 1e-12)
      throw std::invalid_argument("trajectory sampling interval exceeds detector window");
  }

  MeasurementGrid grid;
  grid.window = window;
  grid.num_intervals =
      static_cast<std::size_t>(std::ceil(traj.horizon / window - 1e-9));
  if (grid.num_intervals == 0) grid.num_intervals = 1;

  struct Acc {
    int count = 0;
    double speed_sum = 0.0;
    double time_occupied = 0.0;  // sum of L/v over crossings [s]
  };

  for (const auto& spec : specs) {
    DetectorSeries series;
    series.position = spec.position;
    series.lanes = spec.lanes;
    if (series.lanes.empty())
      throw std::invalid_argument("detector lane set must be resolved before sensing");
    std::vector<Acc> acc(series.lanes.size() * grid.num_intervals);

    for (const auto& trace : traj.vehicles) {
      for (std::size_t k = 1; k < trace.samples.size(); ++k) {
        const auto& s0 = trace.samples[k - 1];
        const auto& s1 = trace.samples[k];
        if (!(s0.position < spec.position && spec.position <= s1.position)) continue;
        const double dx = s1.position - s0.position;
        const double frac = dx > 0 ? (spec.position - s0.position) / dx : 0.0;
        const double tc = s0.t + frac * (s1.t - s0.t);
        const double vc = s0.speed + frac * (s1.speed - s0.speed);
        const int lane = s0.lane;
        auto lane_it = std::find(series.lanes.begin(), series.lanes.end(), lane);
        if (lane_it == series.lanes.end()) continue;
        const auto li = static_cast<std::size_t>(lane_it - series.lanes.begin());
        auto interval = static_cast<std::size_t>(tc / window);
        interval = std::min(interval, grid.num_intervals - 1);
        Acc& a = acc[li * grid.num_intervals + interval];
        ++a.count;
        a.speed_sum += vc;
        if (vc > 0) a.time_occupied += traj.vehicle_length / vc;
      }
    }

    series.cells.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
      MeasCell& c = series.cells[i];
      c.flow = acc[i].count / window * 3600.0;
      c.flow_valid = true;
      if (acc[i].count > 0) {
        c.speed = acc[i].speed_sum / acc[i].count;
        c.speed_valid = true;
        c.occ = std::min(100.0, 100.0 * acc[i].time_occupied / window);
        c.occ_valid = true;
      }
    }
    grid.detectors.push_back(std::move(series));
  }
  grid.validate();
  return grid;
}

std::string measurements_to_csv(const MeasurementGrid& grid) {
  std::ostringstream out;
  out.precision(17);  // full double round-trip, so re-parsing is lossless
  out << "time_s,position_m,lane,flow_vph,speed_mps,occupancy_pct\n";
  for (const auto& d : grid.detectors) {
    for (std::size_t li = 0; li < d.lanes.size(); ++li) {
      for (std::size_t i = 0; i < grid.num_intervals; ++i) {
        const MeasCell& c = d.at(li, i, grid.num_intervals);
        out << i * grid.window << "," << d.position << "," << d.lanes[li] << ",";
        if (c.flow_valid) out << c.flow;
        out << ",";
        if (c.speed_valid) out << c.speed;
        out << ",";
        if (c.occ_valid) out << c.occ;
        out << "\n";
      }
    }
  }
  return out.str();
}

void export_measurements(const MeasurementGrid& grid, const std::string& path) {
  io::atomic_write(path, measurements_to_csv(grid));
}

MeasurementGrid parse_measurements(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty measurement file");
  {
    const auto header = io::split_csv(line);
    const std::vector<std::string> expected = {"time_s",   "position_m",
                                               "lane",     "flow_vph",
                                               "speed_mps", "occupancy_pct"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
      throw std::runtime_error("measurement CSV header mismatch");
  }

  struct Row {
    double t;
    double pos;
    int lane;
    MeasCell cell;
  };
  std::vector<Row> rows;
  std::set<double> times;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split_csv(line);
    const std::string ctx = "line " + std::to_string(lineno);
    if (f.size() != 6) throw std::runtime_error(ctx + ": expected 6 columns");
    Row r;
    r.t = io::parse_double(f[0], ctx);
    r.pos = io::parse_double(f[1], ctx);
    r.lane = static_cast<int>(io::parse_long(f[2], ctx));
    if (!f[3].empty()) {
      r.cell.flow = io::parse_double(f[3], ctx);
      r.cell.flow_valid = true;
    }
    if (!f[4].empty()) {
      r.cell.speed = io::parse_double(f[4], ctx);
      r.cell.speed_valid = true;
    }
    if (!f[5].empty()) {
      r.cell.occ = io::parse_double(f[5], ctx);
      r.cell.occ_valid = true;
    }
    rows.push_back(r);
    times.insert(r.t);
  }
  if (rows.empty()) throw std::runtime_error("measurement file has no data rows");

  std::vector<double> sorted_times(times.begin(), times.end());
  double window = 0.0;
  if (sorted_times.size() >= 2) {
    window = sorted_times[1] - sorted_times[0];
    for (std::size_t i = 1; i < sorted_times.size(); ++i) {
      const double d = sorted_times[i] - sorted_times[i - 1];
      if (std::abs(d - window) > 1e-6)
        throw std::runtime_error("non-uniform or non-monotone interval boundaries");
    }
  } else {
    window = sorted_times[0] > 0 ? sorted_times[0] : 1.0;
  }

  MeasurementGrid grid;
  grid.window = window;
  grid.num_intervals = sorted_times.size();

  std::map<double, std::set<int>> det_lanes;
  for (const auto& r : rows) det_lanes[r.pos].insert(r.lane);
  std::map<double, std::size_t> det_index;
  for (const auto& [pos, lanes] : det_lanes) {
    DetectorSeries s;
    s.position = pos;
    s.lanes.assign(lanes.begin(), lanes.end());
    s.cells.resize(s.lanes.size() * grid.num_intervals);
    det_index[pos] = grid.detectors.size();
    grid.detectors.push_back(std::move(s));
  }
  for (const auto& r : rows) {
    auto& d = grid.detectors[det_index[r.pos]];
    const auto li = static_cast<std::size_t>(
        std::find(d.lanes.begin(), d.lanes.end(), r.lane) - d.lanes.begin());
    const auto ti = static_cast<std::size_t>(
        std::lower_bound(sorted_times.begin(), sorted_times.end(), r.t - 1e-9) -
        sorted_times.begin());
    d.at(li, ti, grid.num_intervals) = r.cell;
  }
  grid.validate();
  return grid;
}

MeasurementGrid ingest_measurements(const std::string& path) {
  return parse_measurements(io::read_file(path));
}

MeasurementGrid aggregate(const MeasurementGrid& grid, double new_window) {
  const double ratio = new_window / grid.window;
  const auto k = static_cast<std::size_t>(std::llround(ratio));
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9)
    throw std::invalid_argument(
        "new window must be an integer multiple of the grid window");
  if (k == 1) return grid;

  MeasurementGrid out;
  out.window = new_window;
  out.num_intervals = (grid.num_intervals + k - 1) / k;
  for (const auto& d : grid.detectors) {
    DetectorSeries s;
    s.position = d.position;
    s.lanes = d.lanes;
    s.cells.resize(s.lanes.size() * out.num_intervals);
    for (std::size_t li = 0; li < d.lanes.size(); ++li) {
      for (std::size_t ti = 0; ti < out.num_intervals; ++ti) {
        double flow_sum = 0.0;
        int flow_n = 0;
        double speed_weighted = 0.0, count_sum = 0.0;
        double occ_sum = 0.0;
        int occ_n = 0;
        for (std::size_t j = ti * k; j < std::min((ti + 1) * k, grid.num_intervals);
             ++j) {
          const MeasCell& c = d.at(li, j, grid.num_intervals);
          if (c.flow_valid) {
            flow_sum += c.flow;
            ++flow_n;
          }
          if (c.speed_valid && c.flow_valid) {
            speed_weighted += c.speed * c.flow;
            count_sum += c.flow;
          }
          if (c.occ_valid) {
            occ_sum += c.occ;
            ++occ_n;
          }
        }
        MeasCell& o = s.at(li, ti, out.num_intervals);
        if (flow_n > 0) {
          o.flow = flow_sum / flow_n;
          o.flow_valid = true;
        }
        if (count_sum > 0) {
          o.speed = speed_weighted / count_sum;
          o.speed_valid = true;
        }
        if (occ_n > 0) {
          o.occ = occ_sum / occ_n;
          o.occ_valid = true;
        }
      }
    }
    out.detectors.push_back(std::move(s));
  }
  out.validate();
  return out;
}

std::optional<double> cell_density(const MeasCell& cell) {
  if (!cell.flow_valid) return std::nullopt;
  if (cell.flow == 0.0) return 0.0;
  if (!cell.speed_valid || cell.speed <= 0.0) return std::nullopt;
  return cell.flow / 3600.0 / cell.speed;
}

}  // namespace mcal
