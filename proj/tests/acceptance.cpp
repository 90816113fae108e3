// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the path to the command-line tool (used by criterion 8).
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mcal/calibrate.hpp"
#include "mcal/io.hpp"
#include "mcal/macro.hpp"
#include "mcal/metrics.hpp"
#include "mcal/microsim.hpp"
#include "mcal/optimizer.hpp"
#include "mcal/scenario.hpp"
#include "mcal/sensing.hpp"

using namespace mcal;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("criterion %d: %s  [%s]\n", criterion, pass ? "PASS" : "FAIL",
              what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void fail(int criterion, const std::string& what, const std::string& why) {
  report(criterion, false, what + " — " + why);
}

std::size_t eval_width() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 4;
}

// Mean of the upstream (700 m) detector's per-interval time-mean speeds over
// intervals ending after t0.
double upstream_detector_speed(const TrajectoryLog& log,
                               const ScenarioConfig& sc, double t0) {
  const MeasurementGrid g = simulate_detectors(log, sc.detectors);
  double sum = 0.0;
  int n = 0;
  for (std::size_t iv = 0; iv < g.num_intervals; ++iv) {
    if ((iv + 1) * g.window <= t0) continue;
    for (std::size_t ln = 0; ln < g.detectors[0].lanes.size(); ++ln) {
      const MeasCell& c = g.detectors[0].at(ln, iv, g.num_intervals);
      if (c.speed_valid) {
        sum += c.speed;
        ++n;
      }
    }
  }
  return n > 0 ? sum / n : -1.0;
}

VehicleTrace line_trace(int id, double x0, double v, double t1, int lane = 0) {
  VehicleTrace tr;
  tr.id = id;
  tr.insert_time = 0.0;
  tr.exit_time = t1;
  for (double t = 0.0; t <= t1 + 1e-9; t += 0.1)
    tr.samples.push_back({t, x0 + v * t, v, lane});
  return tr;
}

struct TwinResult {
  CalibrationReport report_1b;
  CalibrationReport report_3b;
  bool ok = false;
};

// Criteria 1 and 2 share the twin-calibration runs.
TwinResult run_twin(const ScenarioConfig& sc, const MeasurementGrid& obs,
                    const MacroField& truth_field) {
  DEConfig de;
  de.population = 15;
  de.max_generations = 40;
  de.tolerance = 0.01;
  de.seed = 0;
  de.eval_width = eval_width();

  TwinResult tw;
  {
    ExperimentSpec spec = ExperimentSpec::make("1.b", sc, obs, de);
    spec.validation = truth_field;
    tw.report_1b = run_experiment(spec);
  }
  {
    ExperimentSpec spec = ExperimentSpec::make("3.b", sc, obs, de);
    spec.validation = truth_field;
    tw.report_3b = run_experiment(spec);
  }
  tw.ok = tw.report_1b.error.empty() && tw.report_3b.error.empty();
  return tw;
}

int run_command(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  const ScenarioConfig sc = build_synthetic_merge();
  const ParameterSet gt = ParameterSet::ground_truth();
  const ParameterSet def = ParameterSet::defaults();

  // Shared synthetic ground-truth data.
  const TrajectoryLog truth_traj = run(sc, gt);
  const MeasurementGrid obs = simulate_detectors(truth_traj, sc.detectors);
  const GridSpec macro_grid{sc.network.length, sc.horizon, 10.0, 10.0};
  const MacroField truth_field = edie_fields(truth_traj, macro_grid, sc.network);

  TwinResult tw;

  // --- 1: twin-calibration improvement ---------------------------------
  try {
    tw = run_twin(sc, obs, truth_field);
    bool pass = tw.ok;
    std::ostringstream what;
    what.precision(4);
    for (const CalibrationReport* r : {&tw.report_1b, &tw.report_3b}) {
      const bool det_ok = r->detector.speed <= 0.6 * r->baseline_detector.speed;
      const bool mac_ok = r->macro.speed < r->baseline_macro.speed;
      pass = pass && det_ok && mac_ok && r->has_macro;
      what << r->label << " det " << r->detector.speed << " vs baseline "
           << r->baseline_detector.speed << " mph, macro " << r->macro.speed
           << " vs " << r->baseline_macro.speed << " mph; ";
    }
    report(1, pass, "twin calibration improvement: " + what.str());
  } catch (const std::exception& e) {
    fail(1, "twin calibration improvement", e.what());
  }

  // --- 2: congestion pattern -------------------------------------------
  try {
    const double v_gt =
        upstream_detector_speed(truth_traj, sc, sc.horizon - 240.0);
    const TrajectoryLog default_traj = run(sc, def);
    const double v_def =
        upstream_detector_speed(default_traj, sc, sc.horizon - 240.0);
    bool pass = v_gt >= 0.0 && v_gt < 0.5 * gt.vf;
    pass = pass && v_def > 0.8 * def.vf;
    std::ostringstream what;
    what.precision(4);
    what << "truth " << v_gt << " m/s (< " << 0.5 * gt.vf << "), default "
         << v_def << " m/s (> " << 0.8 * def.vf << ")";
    if (tw.ok) {
      for (const CalibrationReport* r : {&tw.report_1b, &tw.report_3b}) {
        const TrajectoryLog cal_traj = run(sc, r->calibrated);
        const double v_cal =
            upstream_detector_speed(cal_traj, sc, sc.horizon - 240.0);
        pass = pass && v_cal >= 0.0 && v_cal < 0.5 * r->calibrated.vf;
        what << ", " << r->label << " calibrated " << v_cal << " m/s";
      }
    } else {
      pass = false;
      what << ", calibrated cells unavailable";
    }
    report(2, pass, "congestion pattern: " + what.str());
  } catch (const std::exception& e) {
    fail(2, "congestion pattern", e.what());
  }

  // --- 3: IDM equilibrium oracle ---------------------------------------
  try {
    const double v_lead = 25.0;
    double x_lead = 200.0, x = 0.0, v = 20.0, acc = 0.0;
    for (double t = 0.0; t < 2000.0; t += 0.1) {
      const double gap = x_lead - 5.0 - x;
      acc = idm_acceleration(v, v - v_lead, gap, true, gt);
      double a = acc;
      if (v + a * 0.1 < 0) a = -v / 0.1;
      x += v * 0.1 + 0.5 * a * 0.1 * 0.1;
      v = std::max(0.0, v + a * 0.1);
      x_lead += v_lead * 0.1;
    }
    const double gap = x_lead - 5.0 - x;
    const double se = idm_equilibrium_gap(v_lead, gt);
    const bool pass = std::abs(gap - se) < 1e-3 && std::abs(acc) <= 1e-4;
    std::ostringstream what;
    what.precision(8);
    what << "gap " << gap << " vs equilibrium " << se << ", residual accel "
         << acc;
    report(3, pass, "IDM equilibrium oracle: " + what.str());
  } catch (const std::exception& e) {
    fail(3, "IDM equilibrium oracle", e.what());
  }

  // --- 4: Edie consistency ---------------------------------------------
  try {
    TrajectoryLog log;
    log.dt = 0.1;
    log.horizon = 100.0;
    log.vehicle_length = 5.0;
    for (int i = 0; i < 80; ++i)
      log.vehicles.push_back(line_trace(i, 1500.0 - 40.0 * i, 20.0, 100.0));
    const GridSpec grid{400.0, 100.0, 100.0, 20.0};
    const MacroField f = edie_fields(log, grid, [](double) { return 1; });
    bool pass = true;
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const std::size_t i = f.index(ix, 2);  // interior window, full coverage
      pass = pass && f.valid[i];
      pass = pass && std::abs(f.density[i] - 0.025) <= 0.02 * 0.025;
      pass = pass && std::abs(f.flow[i] - 0.5) <= 0.02 * 0.5;
    }
    for (std::size_t i = 0; i < f.valid.size(); ++i) {
      if (!f.valid[i] || f.density[i] == 0.0) continue;
      pass = pass && std::abs(f.flow[i] - f.density[i] * f.speed[i]) <=
                         1e-9 * std::max(f.flow[i], 1e-300);
    }
    report(4, pass, "Edie consistency on uniform traffic (40 m / 20 m/s)");
  } catch (const std::exception& e) {
    fail(4, "Edie consistency", e.what());
  }

  // --- 5: detector oracle ----------------------------------------------
  try {
    TrajectoryLog log;
    log.dt = 0.1;
    log.horizon = 50.0;
    log.vehicle_length = 5.0;
    log.vehicles.push_back(line_trace(0, 0.0, 10.0, 50.0));
    log.vehicles.push_back(line_trace(1, 30.0, 15.0, 50.0));
    log.vehicles.push_back(line_trace(2, 60.0, 20.0, 50.0));
    DetectorSpec spec;
    spec.position = 300.0;
    spec.lanes = {0};
    spec.window = 50.0;
    const MeasurementGrid g = simulate_detectors(log, {spec});
    const MeasCell& c = g.detectors[0].at(0, 0, 1);
    const double q_expect = 3.0 / 50.0 * 3600.0;
    const double v_expect = (10.0 + 15.0 + 20.0) / 3.0;
    const double occ_expect = 100.0 * (0.5 + 1.0 / 3.0 + 0.25) / 50.0;
    const bool pass = c.flow_valid && c.speed_valid && c.occ_valid &&
                      std::abs(c.flow - q_expect) <= 1e-9 &&
                      std::abs(c.speed - v_expect) <= 1e-9 &&
                      std::abs(c.occ - occ_expect) <= 1e-9;
    report(5, pass, "detector oracle (q, time-mean v, occupancy to 1e-9)");
  } catch (const std::exception& e) {
    fail(5, "detector oracle", e.what());
  }

  // --- 6: DE benchmark --------------------------------------------------
  try {
    auto sphere = [](const std::vector<double>& x) {
      double s = 0.0;
      for (double v : x) s += v * v;
      return s;
    };
    auto rosenbrock = [](const std::vector<double>& x) {
      return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    DEConfig cfg;
    cfg.population = 20;
    cfg.max_generations = 200;
    cfg.tolerance = 0.0;
    cfg.seed = 11;
    const Bounds b5{std::vector<double>(5, -5.0), std::vector<double>(5, 5.0)};
    const OptResult s1 = differential_evolution(sphere, b5, cfg);
    const OptResult s2 = differential_evolution(sphere, b5, cfg);
    cfg.max_generations = 300;
    cfg.seed = 5;
    const Bounds b2{{-2.0, -2.0}, {2.0, 2.0}};
    const OptResult r = differential_evolution(rosenbrock, b2, cfg);
    bool trace_ok = true;
    for (std::size_t i = 1; i < s1.trace.size(); ++i)
      trace_ok = trace_ok && s1.trace[i] <= s1.trace[i - 1];
    const bool pass = s1.best_objective <= 1e-6 && r.best_objective <= 1e-3 &&
                      s1.best == s2.best && trace_ok;
    std::ostringstream what;
    what << "sphere " << s1.best_objective << ", rosenbrock " << r.best_objective;
    report(6, pass, "DE benchmark: " + what.str());
  } catch (const std::exception& e) {
    fail(6, "DE benchmark", e.what());
  }

  // --- 7: ASM properties ------------------------------------------------
  try {
    bool pass = true;
    auto make_grid = [](std::vector<double> speeds) {
      MeasurementGrid g;
      g.window = 50.0;
      g.num_intervals = 4;
      double x = 300.0;
      for (double s : speeds) {
        DetectorSeries d;
        d.position = x;
        x += 400.0;
        d.lanes = {0};
        d.cells.resize(4);
        for (auto& c : d.cells) {
          c.flow = 1800.0;
          c.speed = s;
          c.flow_valid = c.speed_valid = true;
        }
        g.detectors.push_back(std::move(d));
      }
      return g;
    };
    const GridSpec grid{1000.0, 200.0, 100.0, 25.0};
    // single-datum reproduction and uniform-field identity
    const MacroField uni = asm_reconstruct(make_grid({20.0}), grid, AsmParams{});
    for (double v : uni.speed) pass = pass && std::abs(v - 20.0) <= 1e-9;
    // bounded by input extrema
    const MacroField two = asm_reconstruct(make_grid({10.0, 30.0}), grid, AsmParams{});
    for (double v : two.speed)
      pass = pass && v >= 10.0 - 1e-9 && v <= 30.0 + 1e-9;
    // c_free == c_cong degeneracy: both kernel averages coincide
    MeasurementGrid varied = make_grid({12.0, 24.0});
    for (std::size_t i = 0; i < 4; ++i)
      varied.detectors[0].cells[i].speed = 10.0 + 3.0 * static_cast<double>(i);
    AsmParams dg;
    dg.c_free = 21.4;
    dg.c_cong = 21.4;
    const MacroField fd = asm_reconstruct(varied, grid, dg);
    std::vector<KernelPoint> pts;
    for (const auto& d : varied.detectors)
      for (std::size_t ti = 0; ti < varied.num_intervals; ++ti)
        pts.push_back({d.position, (ti + 0.5) * varied.window,
                       d.at(0, ti, varied.num_intervals).speed});
    for (std::size_t ix = 0; ix < grid.nx(); ++ix)
      for (std::size_t it = 0; it < grid.nt(); ++it) {
        const double x = (ix + 0.5) * grid.dx;
        const double t = (it + 0.5) * grid.dt;
        const double kf = kernel_average(pts, x, t, dg.c_free, dg.sigma, dg.tau_k);
        const double kc = kernel_average(pts, x, t, dg.c_cong, dg.sigma, dg.tau_k);
        pass = pass && std::abs(kf - kc) <= 1e-12;
        pass = pass && std::abs(fd.speed[fd.index(ix, it)] - kf) <= 1e-12;
      }
    report(7, pass, "ASM properties (single datum, uniform, bounds, degeneracy)");
  } catch (const std::exception& e) {
    fail(7, "ASM properties", e.what());
  }

  // --- 8: matrix determinism across --jobs -----------------------------
  try {
    if (cli.empty()) throw std::runtime_error("tool path not supplied");
    namespace fs = std::filesystem;
    const fs::path work = fs::temp_directory_path() / "mcal_acceptance";
    fs::create_directories(work);
    const std::string obs_path = (work / "obs.csv").string();
    export_measurements(obs, obs_path);
    const std::string common =
        cli + " matrix --scenario synthetic --obs " + obs_path +
        " --np 6 --generations 3 --eval-width 4 --de-seed 0 --out ";
    const std::string out1 = (work / "j1").string();
    const std::string out8 = (work / "j8").string();
    bool pass = run_command(common + out1 + " --jobs 1") == 0;
    pass = pass && run_command(common + out8 + " --jobs 8") == 0;
    if (pass) {
      const std::string a = io::read_file(out1 + "/results.csv");
      const std::string b = io::read_file(out8 + "/results.csv");
      pass = a == b && !a.empty();
      for (const auto& label : matrix_labels()) {
        pass = pass && io::read_file(out1 + "/" + label + "_report.csv") ==
                           io::read_file(out8 + "/" + label + "_report.csv");
      }
    }
    report(8, pass, "matrix reports byte-identical for --jobs 1 and --jobs 8");
  } catch (const std::exception& e) {
    fail(8, "matrix determinism", e.what());
  }

  if (g_failures == 0) {
    std::printf("all 8 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
