#include <doctest.h>

#include <cmath>

#include "mcal/sensing.hpp"

using namespace mcal;

namespace {
// Straight-line trace at constant speed, sampled every dt.
VehicleTrace constant_speed_trace(int id, double x0, double v, double t0,
                                  double t1, double dt, int lane = 0) {
  VehicleTrace tr;
  tr.id = id;
  tr.insert_time = t0;
  tr.exit_time = t1;
  for (double t = t0; t <= t1 + 1e-9; t += dt)
    tr.samples.push_back({t, x0 + v * (t - t0), v, lane});
  return tr;
}

TrajectoryLog one_vehicle_log(double v = 10.0) {
  TrajectoryLog log;
  log.dt = 0.1;
  log.horizon = 50.0;
  log.vehicle_length = 5.0;
  log.vehicles.push_back(constant_speed_trace(0, 0.0, v, 0.0, 50.0, 0.1));
  return log;
}

DetectorSpec spec_at(double x, double window = 50.0) {
  DetectorSpec d;
  d.position = x;
  d.lanes = {0};
  d.window = window;
  return d;
}
}  // namespace

TEST_CASE("one crossing at 10 m/s: flow 72 vph, speed 10, occupancy 1 percent") {
  const MeasurementGrid g = simulate_detectors(one_vehicle_log(), {spec_at(100.0)});
  REQUIRE(g.detectors.size() == 1);
  REQUIRE(g.num_intervals == 1);
  const MeasCell& c = g.detectors[0].at(0, 0, 1);
  CHECK(c.flow_valid);
  CHECK(c.speed_valid);
  CHECK(c.occ_valid);
  CHECK(c.flow == doctest::Approx(72.0));
  CHECK(c.speed == doctest::Approx(10.0));
  CHECK(c.occ == doctest::Approx(1.0));
}

TEST_CASE("no crossings: zero flow is valid, speed and occupancy are missing") {
  const MeasurementGrid g =
      simulate_detectors(one_vehicle_log(), {spec_at(900.0)});
  const MeasCell& c = g.detectors[0].at(0, 0, 1);
  CHECK(c.flow_valid);
  CHECK(c.flow == doctest::Approx(0.0));
  CHECK_FALSE(c.speed_valid);
  CHECK_FALSE(c.occ_valid);
}

TEST_CASE("speed is the arithmetic time mean of crossing speeds") {
  TrajectoryLog log;
  log.dt = 0.1;
  log.horizon = 50.0;
  log.vehicle_length = 5.0;
  log.vehicles.push_back(constant_speed_trace(0, 0.0, 10.0, 0.0, 50.0, 0.1));
  log.vehicles.push_back(constant_speed_trace(1, 50.0, 20.0, 0.0, 50.0, 0.1));
  const MeasurementGrid g = simulate_detectors(log, {spec_at(300.0)});
  const MeasCell& c = g.detectors[0].at(0, 0, 1);
  CHECK(c.flow == doctest::Approx(144.0));
  CHECK(c.speed == doctest::Approx(15.0));
  // occupancy adds per vehicle: 100*(5/10 + 5/20)/50
  CHECK(c.occ == doctest::Approx(1.5));
}

TEST_CASE("crossing time is interpolated between samples") {
  // Vehicle passes x=100 mid-step; the crossing must land in the interval
  // containing the interpolated time, not the sample time.
  TrajectoryLog log;
  log.dt = 0.1;
  log.horizon = 100.0;
  log.vehicle_length = 5.0;
  // crosses x=500 at t = 50.0 - 0.025 using dt=0.1 samples
  log.vehicles.push_back(constant_speed_trace(0, 0.25, 10.0, 0.0, 100.0, 0.1));
  const MeasurementGrid g = simulate_detectors(log, {spec_at(500.0, 50.0)});
  REQUIRE(g.num_intervals == 2);
  CHECK(g.detectors[0].at(0, 0, 2).flow == doctest::Approx(72.0));
  CHECK(g.detectors[0].at(0, 1, 2).flow == doctest::Approx(0.0));
}

TEST_CASE("aggregate with an equal window is the identity") {
  const MeasurementGrid g = simulate_detectors(one_vehicle_log(), {spec_at(100.0)});
  const MeasurementGrid g2 = aggregate(g, g.window);
  CHECK(measurements_to_csv(g) == measurements_to_csv(g2));
}

TEST_CASE("aggregation is associative and conserves counts") {
  TrajectoryLog log;
  log.dt = 0.1;
  log.horizon = 200.0;
  log.vehicle_length = 5.0;
  for (int i = 0; i < 12; ++i)
    log.vehicles.push_back(
        constant_speed_trace(i, -15.0 * i, 10.0 + (i % 3), 0.0, 200.0, 0.1));
  const MeasurementGrid g = simulate_detectors(log, {spec_at(600.0, 50.0)});
  const MeasurementGrid g100 = aggregate(g, 100.0);
  const MeasurementGrid g200a = aggregate(g100, 200.0);
  const MeasurementGrid g200b = aggregate(g, 200.0);
  CHECK(measurements_to_csv(g200a) == measurements_to_csv(g200b));

  // total vehicle count is conserved under re-aggregation
  auto total_count = [](const MeasurementGrid& m) {
    double n = 0.0;
    for (const auto& det : m.detectors)
      for (const auto& c : det.cells)
        if (c.flow_valid) n += c.flow * m.window / 3600.0;
    return n;
  };
  CHECK(total_count(g) == doctest::Approx(total_count(g100)));
  CHECK(total_count(g) == doctest::Approx(total_count(g200b)));
}

TEST_CASE("aggregate rejects a non-multiple window") {
  const MeasurementGrid g = simulate_detectors(one_vehicle_log(), {spec_at(100.0)});
  CHECK_THROWS_AS(aggregate(g, 75.0), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(g, 25.0), std::invalid_argument);
}

TEST_CASE("measurement CSV round-trips including missing values") {
  TrajectoryLog log = one_vehicle_log();
  const MeasurementGrid g =
      simulate_detectors(log, {spec_at(100.0, 25.0), spec_at(499.0, 25.0)});
  const std::string csv = measurements_to_csv(g);
  const MeasurementGrid g2 = parse_measurements(csv);
  CHECK(measurements_to_csv(g2) == csv);
  CHECK(g.same_geometry(g2));
}

TEST_CASE("ingest rejects malformed rows") {
  const std::string header =
      "time_s,position_m,lane,flow_vph,speed_mps,occupancy_pct\n";
  // occupancy above 100%
  CHECK_THROWS(parse_measurements(header + "50,100,0,72,10,130\n"));
  // negative flow
  CHECK_THROWS(parse_measurements(header + "50,100,0,-5,10,1\n"));
  // non-numeric field
  CHECK_THROWS(parse_measurements(header + "50,100,0,abc,10,1\n"));
  // non-uniform interval times (gaps of 50 then 80)
  CHECK_THROWS(parse_measurements(header + "50,100,0,72,10,1\n100,100,0,72,10,1\n"
                                           "180,100,0,72,10,1\n"));
  // wrong column count
  CHECK_THROWS(parse_measurements(header + "50,100,0,72\n"));
  // empty file
  CHECK_THROWS(parse_measurements(""));
}

TEST_CASE("cell density is flow over speed") {
  MeasCell c;
  c.flow = 1800.0;
  c.speed = 25.0;
  c.flow_valid = c.speed_valid = true;
  const auto rho = cell_density(c);
  REQUIRE(rho.has_value());
  CHECK(*rho == doctest::Approx(1800.0 / 3600.0 / 25.0));

  c.flow = 0.0;
  c.speed_valid = false;
  const auto rho0 = cell_density(c);
  REQUIRE(rho0.has_value());
  CHECK(*rho0 == doctest::Approx(0.0));

  c.flow = 100.0;
  CHECK_FALSE(cell_density(c).has_value());  // flow without speed

  c.flow_valid = false;
  CHECK_FALSE(cell_density(c).has_value());
}

TEST_CASE("multi-lane detectors keep lanes separate") {
  TrajectoryLog log;
  log.dt = 0.1;
  log.horizon = 50.0;
  log.vehicle_length = 5.0;
  log.vehicles.push_back(constant_speed_trace(0, 0.0, 10.0, 0.0, 50.0, 0.1, 0));
  log.vehicles.push_back(constant_speed_trace(1, 0.0, 20.0, 0.0, 50.0, 0.1, 1));
  DetectorSpec d;
  d.position = 100.0;
  d.lanes = {0, 1};
  d.window = 50.0;
  const MeasurementGrid g = simulate_detectors(log, {d});
  CHECK(g.detectors[0].at(0, 0, 1).speed == doctest::Approx(10.0));
  CHECK(g.detectors[0].at(1, 0, 1).speed == doctest::Approx(20.0));
}
