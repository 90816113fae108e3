#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcal/params.hpp"
#include "mcal/scenario.hpp"

namespace mcal {

/// Relation to the vehicle directly ahead. Gap is bumper-to-bumper.
struct LeaderContext {
  double gap = 0.0;       // [m], > 0 when a leader exists
  double dv = 0.0;        // v_follower - v_leader [m/s]
  bool exists = false;
  double leader_speed = 0.0;  // [m/s], meaningful when exists
};

/// Overlapping bumpers in the same lane. Signals an integration or logic
/// bug, not a recoverable condition.
struct CollisionError : std::runtime_error {
  CollisionError(int a, int b, double t)
      : std::runtime_error("collision between vehicles " + std::to_string(a) +
                           " and " + std::to_string(b) + " at t=" +
                           std::to_string(t)),
        vehicle_a(a), vehicle_b(b), time(t) {}
  int vehicle_a;
  int vehicle_b;
  double time;
};

struct TrajectorySample {
  double t;
  double position;
  double speed;
  int lane;
};

struct VehicleTrace {
  int id = 0;
  double insert_time = 0.0;
  double exit_time = -1.0;  // < 0 while still in the network
  std::vector<TrajectorySample> samples;
};

struct TrajectoryLog {
  double dt = 0.1;
  double horizon = 0.0;
  double vehicle_length = 5.0;
  std::vector<VehicleTrace> vehicles;

  bool empty() const { return vehicles.empty(); }
};

/// IDM follower acceleration, clamped below at the emergency deceleration.
/// With no leader the interaction term is zero.
double idm_acceleration(double v, double dv, double s, bool leader_exists,
                        const ParameterSet& p);

/// Desired space gap s*(v, dv), clamped at >= 0.
double idm_desired_gap(double v, double dv, const ParameterSet& p);

/// Closed-form equilibrium gap behind a leader at constant speed v.
double idm_equilibrium_gap(double v, const ParameterSet& p);

enum class LcDirection { Stay, Left, Right };

struct LcDecision {
  LcDirection direction = LcDirection::Stay;
  bool request_cooperation = false;  // waiting on an unsafe mandatory change
  double urgency = 0.0;              // strategic urgency score
};

/// Gaps and speeds seen in one adjacent lane.
struct AdjacentLane {
  bool exists = false;
  bool discretionary_allowed = false;  // false for acceleration lanes
  LeaderContext lead;                  // new leader relative to ego
  double rear_gap = 0.0;               // new follower's bumper gap to ego
  double rear_speed = 0.0;
  bool rear_exists = false;
};

struct LcContext {
  double speed = 0.0;
  LeaderContext current_lead;
  AdjacentLane left;
  AdjacentLane right;
  int mandatory_changes = 0;          // lane changes still required
  double mandatory_distance = 1e9;    // [m] to the point where they must be done
  LcDirection mandatory_direction = LcDirection::Stay;
  double cooldown = 0.0;              // [s] remaining post-change cooldown
  double speed_gain_held = 0.0;       // [s] the speed-gain condition has held
  LcDirection speed_gain_direction = LcDirection::Stay;
};

/// Gap-acceptance rule: admissible iff front gap >= s*_front/lcAssertive and
/// rear gap >= s*_rear/lcAssertive.
bool lane_change_admissible(double ego_speed, const LeaderContext& new_lead,
                            bool rear_exists, double rear_gap, double rear_speed,
                            const ParameterSet& p);

/// Motivation-scored lane-change decision. Mandatory (strategic) motivations
/// dominate discretionary (speed-gain, keep-right) ones; degenerate inputs
/// yield Stay.
LcDecision lane_change_decide(const LcContext& ctx, const ParameterSet& p);

struct Vehicle {
  int id = 0;
  int lane = 0;
  double position = 0.0;  // front bumper [m]
  double speed = 0.0;     // [m/s]
  double length = 5.0;
  int destination = -1;   // -1 = mainline exit, k = off-ramp k
  double cooldown = 0.0;
  double speed_gain_held = 0.0;
  LcDirection speed_gain_direction = LcDirection::Stay;
  int seek_target = -1;  // id of the vehicle bounding the targeted merge slot
};

/// One discrete-time simulation over a scenario. Strictly sequential;
/// distinct instances may run in parallel.
class Simulation {
 public:
  Simulation(const ScenarioConfig& scenario, const ParameterSet& params);

  /// Tick order: lane changes (decided from the pre-step state, applied in
  /// id order), accelerations, ballistic update, removals, insertions.
  void step();
  void run_to_end();

  double time() const { return time_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const TrajectoryLog& log() const { return log_; }
  TrajectoryLog take_log() { return std::move(log_); }

  int inserted_count() const { return inserted_; }
  int exited_count() const { return exited_; }
  std::size_t queued_count() const;

  /// Places a vehicle directly, bypassing the arrival process. Test hook.
  int add_vehicle(int lane, double position, double speed, int destination = -1);

 private:
  struct OriginQueue {
    std::vector<double> schedule;  // arrival times, ascending
    std::size_t next = 0;          // first not yet offered
    std::vector<int> waiting_dest; // queued (unserved) vehicle destinations
  };

  LeaderContext leader_context(const Vehicle& v) const;
  const Vehicle* find_leader(int lane, double position, int skip_id) const;
  const Vehicle* find_follower(int lane, double position, int skip_id) const;
  AdjacentLane adjacent_lane(const Vehicle& v, int target_lane) const;
  LcContext build_context(const Vehicle& v) const;
  double accel_for(const Vehicle& v, const Vehicle* coop_for, int seek_lane,
                   double wait_decel) const;
  double gap_seek_accel(const Vehicle& v, int target_lane, double acc) const;
  void choose_slot(Vehicle& v, int target_lane);
  const Vehicle* vehicle_by_id(int id) const;
  void apply_lane_changes(const std::vector<LcDecision>& decisions,
                          std::vector<double>& wait_decel,
                          std::vector<std::pair<int, int>>& coop_pairs,
                          std::vector<int>& seek_lanes);
  void insert_arrivals();
  bool try_insert(std::size_t origin, int destination);
  void record_samples();
  void check_collisions() const;
  int sample_destination(std::mt19937_64& rng);

  ScenarioConfig scenario_;
  ParameterSet params_;
  std::vector<Vehicle> vehicles_;  // kept sorted by id
  std::vector<OriginQueue> origins_;
  std::vector<std::mt19937_64> dest_rngs_;
  TrajectoryLog log_;
  double time_ = 0.0;
  long step_count_ = 0;
  int next_id_ = 0;
  int inserted_ = 0;
  int exited_ = 0;
};

/// Full simulation of a scenario: deterministic for a given seed.
TrajectoryLog run(const ScenarioConfig& scenario, const ParameterSet& params);

/// CSV: time_s, vehicle_id, lane, position_m, speed_mps. `decimate` keeps
/// every k-th sample per vehicle (1 = all).
std::string trajectory_to_csv(const TrajectoryLog& log, int decimate = 1);
void save_trajectory(const TrajectoryLog& log, const std::string& path,
                     int decimate = 1);
TrajectoryLog load_trajectory(const std::string& path);

}  // namespace mcal
