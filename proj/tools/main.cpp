#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcal/calibrate.hpp"
#include "mcal/io.hpp"
#include "mcal/macro.hpp"
#include "mcal/metrics.hpp"
#include "mcal/microsim.hpp"
#include "mcal/optimizer.hpp"
#include "mcal/params.hpp"
#include "mcal/scenario.hpp"
#include "mcal/sensing.hpp"

namespace {

using namespace mcal;

// "synthetic" is a magic scenario name for the built-in merge corridor.
ScenarioConfig load_scenario_arg(const std::string& arg) {
  if (arg == "synthetic") return build_synthetic_merge();
  return load_scenario(arg);
}

ParameterSet resolve_params(const std::string& preset,
                            const std::vector<std::string>& sets,
                            const ParameterSet& scenario_defaults) {
  ParameterSet p = scenario_defaults;
  if (preset == "default") {
    p = ParameterSet::defaults();
  } else if (preset == "truth") {
    p = ParameterSet::ground_truth();
  } else if (!preset.empty() && preset != "scenario") {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  auto v = p.to_vector();
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects name=value, got: " + kv);
    const std::string name = kv.substr(0, eq);
    bool found = false;
    for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i) {
      if (name == ParameterSet::name(i)) {
        v[i] = io::parse_double(kv.substr(eq + 1), "--set " + name);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("unknown parameter: " + name);
  }
  p = ParameterSet::from_vector(v);
  p.validate();
  return p;
}

struct DeFlags {
  std::size_t np = 15;
  std::size_t generations = 100;
  double weight = 0.8;
  double crossover = 0.9;
  double tolerance = 0.01;
  std::uint64_t seed = 0;
  std::size_t eval_width = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--np", np, "DE population size");
    cmd->add_option("--generations", generations, "DE generation budget");
    cmd->add_option("--weight", weight, "DE differential weight F");
    cmd->add_option("--crossover", crossover, "DE crossover rate CR");
    cmd->add_option("--tolerance", tolerance,
                    "relative population-spread stopping tolerance");
    cmd->add_option("--de-seed", seed, "DE random seed");
    cmd->add_option("--eval-width", eval_width,
                    "concurrent objective evaluations (result-invariant)");
  }
  DEConfig config() const {
    DEConfig de;
    de.population = np;
    de.max_generations = generations;
    de.weight = weight;
    de.crossover = crossover;
    de.tolerance = tolerance;
    de.seed = seed;
    de.eval_width = eval_width;
    return de;
  }
};

MacroField validation_field(const std::string& traj_path,
                            const ScenarioConfig& sc, const GridSpec& grid) {
  const TrajectoryLog truth = load_trajectory(traj_path);
  return edie_fields(truth, grid, sc.network);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"freeway microsimulation, sensing, and calibration toolkit"};
  app.require_subcommand(1);

  // --- simulate ---------------------------------------------------------
  auto* simulate_cmd =
      app.add_subcommand("simulate", "run the microsimulation, write trajectories");
  std::string sim_scenario, sim_out, sim_preset = "scenario";
  std::vector<std::string> sim_sets;
  std::optional<std::uint64_t> sim_seed;
  int sim_decimate = 1;
  simulate_cmd->add_option("--scenario", sim_scenario,
                           "scenario file, or 'synthetic'")->required();
  simulate_cmd->add_option("--out", sim_out, "trajectory CSV path")->required();
  simulate_cmd->add_option("--seed", sim_seed, "demand seed override");
  simulate_cmd->add_option("--preset", sim_preset,
                           "parameter preset: scenario|default|truth");
  simulate_cmd->add_option("--set", sim_sets, "parameter override name=value");
  simulate_cmd->add_option("--decimate", sim_decimate,
                           "keep every k-th trajectory sample");

  // --- detect -----------------------------------------------------------
  auto* detect_cmd =
      app.add_subcommand("detect", "simulate point detectors over trajectories");
  std::string det_scenario, det_traj, det_out;
  detect_cmd->add_option("--scenario", det_scenario,
                         "scenario file, or 'synthetic'")->required();
  detect_cmd->add_option("--traj", det_traj, "trajectory CSV path")->required();
  detect_cmd->add_option("--out", det_out, "measurement CSV path")->required();

  // --- edie -------------------------------------------------------------
  auto* edie_cmd = app.add_subcommand(
      "edie", "generalized flow/density/speed fields from trajectories");
  std::string edie_scenario, edie_traj, edie_out;
  double edie_dx = 10.0, edie_dt = 10.0;
  edie_cmd->add_option("--scenario", edie_scenario,
                       "scenario file, or 'synthetic'")->required();
  edie_cmd->add_option("--traj", edie_traj, "trajectory CSV path")->required();
  edie_cmd->add_option("--out", edie_out, "macro field CSV path")->required();
  edie_cmd->add_option("--dx", edie_dx, "cell length [m]");
  edie_cmd->add_option("--dt", edie_dt, "cell duration [s]");

  // --- asm --------------------------------------------------------------
  auto* asm_cmd = app.add_subcommand(
      "asm", "adaptive-smoothing field reconstruction from detector data");
  std::string asm_obs, asm_out;
  double asm_dx = 160.9, asm_dt = 30.0;
  std::optional<double> asm_length, asm_horizon;
  AsmParams asm_params;
  asm_cmd->add_option("--obs", asm_obs, "measurement CSV path")->required();
  asm_cmd->add_option("--out", asm_out, "macro field CSV path")->required();
  asm_cmd->add_option("--dx", asm_dx, "cell length [m]");
  asm_cmd->add_option("--dt", asm_dt, "cell duration [s]");
  asm_cmd->add_option("--length", asm_length,
                      "field extent [m] (default: past the last detector)");
  asm_cmd->add_option("--horizon", asm_horizon,
                      "field horizon [s] (default: the observed span)");
  asm_cmd->add_option("--c-free", asm_params.c_free, "free-flow wave speed [m/s]");
  asm_cmd->add_option("--c-cong", asm_params.c_cong, "congested wave speed [m/s]");
  asm_cmd->add_option("--sigma", asm_params.sigma, "spatial kernel width [m]");
  asm_cmd->add_option("--tau", asm_params.tau_k, "temporal kernel width [s]");
  asm_cmd->add_option("--v-thr", asm_params.v_thr, "regime crossover speed [m/s]");
  asm_cmd->add_option("--dv", asm_params.dv, "regime transition width [m/s]");

  // --- calibrate --------------------------------------------------------
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "calibrate one experiment cell against detector data");
  std::string cal_scenario, cal_obs, cal_label, cal_out, cal_validation;
  std::optional<std::uint64_t> cal_seed;
  DeFlags cal_de;
  cal_cmd->add_option("--scenario", cal_scenario,
                      "scenario file, or 'synthetic'")->required();
  cal_cmd->add_option("--obs", cal_obs, "observed measurement CSV")->required();
  cal_cmd->add_option("--label", cal_label,
                      "experiment label (1|2|3).(a|b|c)")->required();
  cal_cmd->add_option("--out", cal_out, "report CSV path")->required();
  cal_cmd->add_option("--validation", cal_validation,
                      "ground-truth trajectory CSV for macro validation");
  cal_cmd->add_option("--calib-seed", cal_seed,
                      "simulation seed during calibration (default: data seed + 1)");
  cal_de.attach(cal_cmd);

  // --- matrix -----------------------------------------------------------
  auto* mat_cmd = app.add_subcommand(
      "matrix", "run the full nine-cell calibration experiment matrix");
  std::string mat_scenario, mat_obs, mat_out, mat_validation;
  std::size_t mat_jobs = 1;
  DeFlags mat_de;
  mat_cmd->add_option("--scenario", mat_scenario,
                      "scenario file, or 'synthetic'")->required();
  mat_cmd->add_option("--obs", mat_obs, "observed measurement CSV")->required();
  mat_cmd->add_option("--out", mat_out, "output directory")->required();
  mat_cmd->add_option("--validation", mat_validation,
                      "ground-truth trajectory CSV for macro validation");
  mat_cmd->add_option("--jobs", mat_jobs, "experiment cells run in parallel");
  mat_de.attach(mat_cmd);

  // --- evaluate ---------------------------------------------------------
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "RMSE of a parameter set against observed detector data");
  std::string eval_scenario, eval_obs, eval_quantity = "speed";
  std::string eval_preset = "scenario", eval_out;
  std::vector<std::string> eval_sets;
  std::optional<std::uint64_t> eval_seed;
  eval_cmd->add_option("--scenario", eval_scenario,
                       "scenario file, or 'synthetic'")->required();
  eval_cmd->add_option("--obs", eval_obs, "observed measurement CSV")->required();
  eval_cmd->add_option("--quantity", eval_quantity,
                       "flow|speed|occupancy|density");
  eval_cmd->add_option("--preset", eval_preset,
                       "parameter preset: scenario|default|truth");
  eval_cmd->add_option("--set", eval_sets, "parameter override name=value");
  eval_cmd->add_option("--seed", eval_seed, "demand seed override");
  eval_cmd->add_option("--out", eval_out, "optional CSV output path");

  // --- heatmap ----------------------------------------------------------
  auto* heat_cmd =
      app.add_subcommand("heatmap", "render a macro field as a PPM image");
  std::string heat_field, heat_quantity = "speed", heat_out;
  std::optional<double> heat_lo, heat_hi;
  heat_cmd->add_option("--field", heat_field, "macro field CSV path")->required();
  heat_cmd->add_option("--quantity", heat_quantity, "flow|speed|density");
  heat_cmd->add_option("--out", heat_out, "PPM output path")->required();
  heat_cmd->add_option("--lo", heat_lo, "value mapped to blue (SI units)");
  heat_cmd->add_option("--hi", heat_hi, "value mapped to red (SI units)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*simulate_cmd) {
    ScenarioConfig sc = load_scenario_arg(sim_scenario);
    if (sim_seed) sc.seed = *sim_seed;
    const ParameterSet p = resolve_params(sim_preset, sim_sets, sc.defaults);
    save_trajectory(run(sc, p), sim_out, sim_decimate);
    return 0;
  }

  if (*detect_cmd) {
    const ScenarioConfig sc = load_scenario_arg(det_scenario);
    const TrajectoryLog traj = load_trajectory(det_traj);
    export_measurements(simulate_detectors(traj, sc.detectors), det_out);
    return 0;
  }

  if (*edie_cmd) {
    const ScenarioConfig sc = load_scenario_arg(edie_scenario);
    const TrajectoryLog traj = load_trajectory(edie_traj);
    GridSpec grid{sc.network.length, sc.horizon, edie_dx, edie_dt};
    export_macro(edie_fields(traj, grid, sc.network), edie_out);
    return 0;
  }

  if (*asm_cmd) {
    const MeasurementGrid obs = ingest_measurements(asm_obs);
    double max_pos = 0.0;
    for (const auto& d : obs.detectors) max_pos = std::max(max_pos, d.position);
    GridSpec grid;
    grid.dx = asm_dx;
    grid.dt = asm_dt;
    grid.length = asm_length ? *asm_length : max_pos + asm_dx;
    grid.horizon =
        asm_horizon ? *asm_horizon
                    : obs.window * static_cast<double>(obs.num_intervals);
    export_macro(asm_reconstruct(obs, grid, asm_params), asm_out);
    return 0;
  }

  if (*cal_cmd) {
    const ScenarioConfig sc = load_scenario_arg(cal_scenario);
    ExperimentSpec spec = ExperimentSpec::make(
        cal_label, sc, ingest_measurements(cal_obs), cal_de.config());
    if (cal_seed) spec.calibration_seed = *cal_seed;
    if (!cal_validation.empty())
      spec.validation = validation_field(cal_validation, sc, spec.macro_grid);
    save_reports({run_experiment(spec)}, cal_out);
    return 0;
  }

  if (*mat_cmd) {
    const ScenarioConfig sc = load_scenario_arg(mat_scenario);
    const MeasurementGrid obs = ingest_measurements(mat_obs);
    std::optional<MacroField> validation;
    if (!mat_validation.empty()) {
      const GridSpec grid{sc.network.length, sc.horizon, 10.0, 10.0};
      validation = validation_field(mat_validation, sc, grid);
    }
    const auto reports =
        run_matrix(sc, obs, validation, mat_de.config(), mat_jobs);
    std::filesystem::create_directories(mat_out);
    const std::filesystem::path dir(mat_out);
    save_reports(reports, (dir / "results.csv").string());
    for (const auto& r : reports)
      save_reports({r}, (dir / (r.label + "_report.csv")).string());
    return 0;
  }

  if (*eval_cmd) {
    ScenarioConfig sc = load_scenario_arg(eval_scenario);
    if (eval_seed) sc.seed = *eval_seed;
    const ParameterSet p = resolve_params(eval_preset, eval_sets, sc.defaults);
    const Quantity z = quantity_from_string(eval_quantity);
    const double rmse = objective(ingest_measurements(eval_obs), sc, p, z);
    std::printf("%s_rmse,%.10g\n", quantity_name(z), rmse);
    if (!eval_out.empty()) {
      std::ostringstream out;
      out.precision(10);
      out << "quantity,rmse\n" << quantity_name(z) << "," << rmse << "\n";
      io::atomic_write(eval_out, out.str());
    }
    return 0;
  }

  if (*heat_cmd) {
    const MacroField field = load_macro(heat_field);
    MacroQuantity q;
    double hi_default;
    if (heat_quantity == "flow") {
      q = MacroQuantity::Flow;
      hi_default = 0.7;  // veh/s per lane
    } else if (heat_quantity == "speed") {
      q = MacroQuantity::Speed;
      hi_default = 35.0;  // m/s
    } else if (heat_quantity == "density") {
      q = MacroQuantity::Density;
      hi_default = 0.12;  // veh/m per lane
    } else {
      throw std::invalid_argument("heatmap quantity must be flow, speed, or density");
    }
    export_heatmap(field, q, heat_lo.value_or(0.0), heat_hi.value_or(hi_default),
                   heat_out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const mcal::CollisionError& e) {
    std::cerr << "fault: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fault: " << e.what() << "\n";
    return 2;
  }
}
