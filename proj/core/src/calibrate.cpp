#include "mcal/calibrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mcal/io.hpp"
#include "mcal/microsim.hpp"

namespace mcal {

std::string experiment_label(ParamSubset subset, Quantity quantity) {
  std::string label;
  switch (subset) {
    case ParamSubset::CarFollowing: label = "1."; break;
    case ParamSubset::LaneChange: label = "2."; break;
    case ParamSubset::Both: label = "3."; break;
  }
  switch (quantity) {
    case Quantity::Flow: label += "a"; break;
    case Quantity::Speed: label += "b"; break;
    case Quantity::Occupancy: label += "c"; break;
    default:
      throw std::invalid_argument("experiment quantity must be flow, speed, or occupancy");
  }
  return label;
}

std::pair<ParamSubset, Quantity> parse_experiment_label(const std::string& label) {
  if (label.size() != 3 || label[1] != '.')
    throw std::invalid_argument("bad experiment label: " + label);
  ParamSubset subset;
  switch (label[0]) {
    case '1': subset = ParamSubset::CarFollowing; break;
    case '2': subset = ParamSubset::LaneChange; break;
    case '3': subset = ParamSubset::Both; break;
    default: throw std::invalid_argument("bad experiment label: " + label);
  }
  Quantity q;
  switch (label[2]) {
    case 'a': q = Quantity::Flow; break;
    case 'b': q = Quantity::Speed; break;
    case 'c': q = Quantity::Occupancy; break;
    default: throw std::invalid_argument("bad experiment label: " + label);
  }
  return {subset, q};
}

std::vector<std::string> matrix_labels() {
  return {"1.a", "1.b", "1.c", "2.a", "2.b", "2.c", "3.a", "3.b", "3.c"};
}

void ExperimentSpec::validate() const {
  if (experiment_label(subset, quantity) != label)
    throw std::invalid_argument("experiment label " + label +
                                " inconsistent with subset/quantity");
  const std::size_t expected =
      subset == ParamSubset::Both ? ParameterSet::kNumParams : ParameterSet::kNumCf;
  if (bounds.with_subset(subset).num_free() != expected)
    throw std::invalid_argument("experiment " + label + ": wrong free-parameter count");
  if (observed.detectors.empty())
    throw std::invalid_argument("experiment " + label + ": observed grid is empty");
  scenario.validate();
}

ExperimentSpec ExperimentSpec::make(const std::string& label,
                                    const ScenarioConfig& scenario,
                                    const MeasurementGrid& observed,
                                    const DEConfig& de) {
  ExperimentSpec spec;
  auto [subset, quantity] = parse_experiment_label(label);
  spec.subset = subset;
  spec.quantity = quantity;
  spec.label = label;
  spec.de = de;
  spec.scenario = scenario;
  spec.observed = observed;
  spec.calibration_seed = scenario.seed + 1;
  spec.macro_grid = {scenario.network.length, scenario.horizon, 10.0, 10.0};
  return spec;
}

BoundObjective make_objective(const ExperimentSpec& spec) {
  spec.validate();
  BoundObjective bo;
  bo.mask = spec.bounds.with_subset(spec.subset);
  bo.mask.validate();
  const auto idx = bo.mask.free_indices();
  bo.box.lower.reserve(idx.size());
  bo.box.upper.reserve(idx.size());
  for (std::size_t j : idx) {
    bo.box.lower.push_back(bo.mask.lower[j]);
    bo.box.upper.push_back(bo.mask.upper[j]);
  }
  bo.default_vector = bo.mask.extract(spec.scenario.defaults);

  ScenarioConfig calib_scenario = spec.scenario;
  calib_scenario.seed = spec.calibration_seed;
  const ParameterSet pinned = spec.scenario.defaults;
  const MeasurementGrid observed = spec.observed;
  const Quantity quantity = spec.quantity;
  const ParameterBounds mask = bo.mask;
  bo.f = [calib_scenario, pinned, observed, quantity, mask](
             const std::vector<double>& x) {
    return objective(observed, calib_scenario, mask.embed(x, pinned), quantity);
  };
  return bo;
}

namespace {

bool grid_all_zero(const MeasurementGrid& grid) {
  for (const auto& d : grid.detectors)
    for (const auto& c : d.cells)
      if (c.flow_valid && c.flow > 0) return false;
  return true;
}

RmseTriple detector_triple(const MeasurementGrid& obs, const MeasurementGrid& sim) {
  RmseTriple t;
  t.flow = rmse_detectors(obs, sim, Quantity::Flow);
  t.speed = rmse_detectors(obs, sim, Quantity::Speed);
  t.density = rmse_detectors(obs, sim, Quantity::Density);
  return t;
}

RmseTriple macro_triple(const MacroField& obs, const MacroField& sim) {
  RmseTriple t;
  t.flow = rmse_macro(obs, sim, Quantity::Flow);
  t.speed = rmse_macro(obs, sim, Quantity::Speed);
  t.density = rmse_macro(obs, sim, Quantity::Density);
  return t;
}

}  // namespace

CalibrationReport run_experiment(const ExperimentSpec& spec) {
  CalibrationReport report;
  report.label = spec.label;
  report.data_seed = spec.scenario.seed;
  report.calibration_seed = spec.calibration_seed;

  if (grid_all_zero(spec.observed)) {
    report.trivial = true;
    report.calibrated = spec.scenario.defaults;
    return report;
  }

  BoundObjective bo = make_objective(spec);
  // One initial individual at the defaults, so greedy selection guarantees
  // the calibrated objective never exceeds the uncalibrated baseline.
  report.opt = differential_evolution(bo.f, bo.box, spec.de, {bo.default_vector});
  report.calibrated = bo.mask.embed(report.opt.best, spec.scenario.defaults);

  ScenarioConfig eval_scenario = spec.scenario;
  eval_scenario.seed = spec.calibration_seed;
  const TrajectoryLog calibrated_traj = run(eval_scenario, report.calibrated);
  const MeasurementGrid calibrated_sim =
      simulate_detectors(calibrated_traj, eval_scenario.detectors);
  report.detector = detector_triple(spec.observed, calibrated_sim);

  const TrajectoryLog default_traj = run(eval_scenario, spec.scenario.defaults);
  const MeasurementGrid default_sim =
      simulate_detectors(default_traj, eval_scenario.detectors);
  report.baseline_detector = detector_triple(spec.observed, default_sim);

  if (spec.validation) {
    const MacroField calibrated_field =
        edie_fields(calibrated_traj, spec.macro_grid, spec.scenario.network);
    const MacroField default_field =
        edie_fields(default_traj, spec.macro_grid, spec.scenario.network);
    report.macro = macro_triple(*spec.validation, calibrated_field);
    report.baseline_macro = macro_triple(*spec.validation, default_field);
    report.has_macro = true;
  }
  return report;
}

std::vector<CalibrationReport> run_matrix(const ScenarioConfig& scenario,
                                          const MeasurementGrid& observed,
                                          const std::optional<MacroField>& validation,
                                          const DEConfig& base_de,
                                          std::size_t jobs) {
  if (observed.detectors.empty())
    throw std::invalid_argument("run_matrix: observed grid is empty");
  const auto labels = matrix_labels();
  std::vector<CalibrationReport> reports(labels.size());

  auto run_cell = [&](std::size_t i) {
    try {
      ExperimentSpec spec = ExperimentSpec::make(labels[i], scenario, observed, base_de);
      spec.validation = validation;
      reports[i] = run_experiment(spec);
    } catch (const std::exception& e) {
      reports[i].label = labels[i];
      reports[i].error = e.what();
    }
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < labels.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= labels.size()) return;
        run_cell(i);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < std::min(jobs, labels.size()); ++k)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return reports;
}

std::string reports_to_csv(const std::vector<CalibrationReport>& reports) {
  std::ostringstream out;
  out.precision(10);
  out << "label,det_q_vph,det_v_mph,det_rho_vpm,mac_q_vph,mac_v_mph,mac_rho_vpm,"
         "converged,generations,evaluations,data_seed,calib_seed,status\n";
  auto row = [&](const std::string& label, const RmseTriple& det,
                 const RmseTriple& mac, const CalibrationReport* r) {
    out << label << "," << det.flow << "," << det.speed << "," << det.density
        << "," << mac.flow << "," << mac.speed << "," << mac.density << ",";
    if (r) {
      out << (r->opt.converged ? 1 : 0) << "," << r->opt.generations << ","
          << r->opt.evaluations << "," << r->data_seed << ","
          << r->calibration_seed << ","
          << (r->trivial ? "trivial" : (r->error.empty() ? "ok" : r->error));
    } else {
      out << ",,,,,baseline";
    }
    out << "\n";
  };
  // Baseline RMSEs are identical across cells; report them once from the
  // first successful cell.
  for (const auto& r : reports) {
    if (r.error.empty() && !r.trivial) {
      row("default", r.baseline_detector, r.baseline_macro, nullptr);
      break;
    }
  }
  for (const auto& r : reports) row(r.label, r.detector, r.macro, &r);
  return out.str();
}

void save_reports(const std::vector<CalibrationReport>& reports,
                  const std::string& path) {
  io::atomic_write(path, reports_to_csv(reports));
}

}  // namespace mcal
