#include "mcal/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "mcal/io.hpp"

namespace mcal {

namespace {
constexpr double kLookaheadTime = 30.0;   // strategic lookahead [s]
constexpr double kCooldown = 5.0;          // post-change cooldown [s]
constexpr double kSpeedGainHold = 3.0;     // sustained-gain requirement [s]
constexpr double kAnticipationRange = 250.0;  // [m]

void require_finite(double x, const char* what) {
  if (!std::isfinite(x))
    throw std::invalid_argument(std::string("idm_acceleration: non-finite ") + what);
}

// Speed the ego could plausibly sustain in a lane, for discretionary scoring.
double anticipated_speed(const LeaderContext& lead, double vf) {
  if (lead.exists && lead.gap < kAnticipationRange)
    return std::min(vf, lead.leader_speed);
  return vf;
}
}  // namespace

double idm_desired_gap(double v, double dv, const ParameterSet& p) {
  const double s = p.sj + v * p.tau + v * dv / (2.0 * std::sqrt(p.a * p.b));
  return std::max(s, 0.0);
}

double idm_acceleration(double v, double dv, double s, bool leader_exists,
                        const ParameterSet& p) {
  require_finite(v, "speed");
  require_finite(dv, "relative speed");
  if (leader_exists) {
    require_finite(s, "gap");
    if (!(s > 0)) throw std::invalid_argument("idm_acceleration: gap must be > 0");
  }
  double interaction = 0.0;
  if (leader_exists) {
    const double sstar = p.sj + v * p.tau + v * dv / (2.0 * std::sqrt(p.a * p.b));
    interaction = (sstar / s) * (sstar / s);
  }
  const double free = std::pow(v / p.vf, ParameterSet::kDelta);
  const double acc = p.a * (1.0 - free - interaction);
  return std::max(acc, -ParameterSet::kEmergencyDecel);
}

double idm_equilibrium_gap(double v, const ParameterSet& p) {
  const double denom = 1.0 - std::pow(v / p.vf, ParameterSet::kDelta);
  if (denom <= 0) return std::numeric_limits<double>::infinity();
  return idm_desired_gap(v, 0.0, p) / std::sqrt(denom);
}

bool lane_change_admissible(double ego_speed, const LeaderContext& new_lead,
                            bool rear_exists, double rear_gap, double rear_speed,
                            const ParameterSet& p) {
  if (new_lead.exists) {
    if (!(new_lead.gap > 0)) return false;
    if (p.lcAssertive <= 0) return false;
    const double need =
        idm_desired_gap(ego_speed, ego_speed - new_lead.leader_speed, p) / p.lcAssertive;
    if (new_lead.gap < need) return false;
  }
  if (rear_exists) {
    if (!(rear_gap > 0)) return false;
    if (p.lcAssertive <= 0) return false;
    const double need =
        idm_desired_gap(rear_speed, rear_speed - ego_speed, p) / p.lcAssertive;
    if (rear_gap < need) return false;
  }
  return true;
}

LcDecision lane_change_decide(const LcContext& ctx, const ParameterSet& p) {
  LcDecision d;
  if (ctx.cooldown > 0) return d;

  auto target_of = [&](LcDirection dir) -> const AdjacentLane* {
    if (dir == LcDirection::Left) return &ctx.left;
    if (dir == LcDirection::Right) return &ctx.right;
    return nullptr;
  };
  auto admissible = [&](const AdjacentLane& t) {
    return t.exists && lane_change_admissible(ctx.speed, t.lead, t.rear_exists,
                                              t.rear_gap, t.rear_speed, p);
  };

  if (ctx.mandatory_changes > 0 && ctx.mandatory_direction != LcDirection::Stay) {
    // The speed term is floored so a vehicle stopped at its decision point
    // still registers as urgent rather than dropping to zero urgency.
    d.urgency = p.lcStrategic * ctx.mandatory_changes * std::max(ctx.speed, 1.0) *
                kLookaheadTime / std::max(ctx.mandatory_distance, 1.0);
    const AdjacentLane* t = target_of(ctx.mandatory_direction);
    // Strategic changes are attempted whenever admissible; at urgency >= 1
    // they become mandatory and suppress discretionary motives.
    if (t && admissible(*t)) {
      d.direction = ctx.mandatory_direction;
      return d;
    }
    // Only ask others to yield when the gap they can open (at most ~2.2x
    // their desired gap, see the cooperation shrink floor) would actually be
    // accepted; otherwise a follower would stall forever behind a vehicle
    // that never takes the gap.
    if (d.urgency >= 1.0 && 2.2 * p.lcAssertive >= 1.0) {
      d.request_cooperation = true;
      return d;
    }
  }

  // Speed gain: requires the anticipated gain to have held for 3 s.
  if (p.lcSpeedGain > 0 && ctx.speed_gain_direction != LcDirection::Stay &&
      ctx.speed_gain_held >= kSpeedGainHold) {
    const AdjacentLane* t = target_of(ctx.speed_gain_direction);
    if (t && t->discretionary_allowed && admissible(*t)) {
      d.direction = ctx.speed_gain_direction;
      return d;
    }
  }

  // Keep right: change right when it costs little anticipated speed.
  if (p.lcKeepRight > 0 && ctx.right.exists && ctx.right.discretionary_allowed) {
    const double cost = anticipated_speed(ctx.current_lead, p.vf) -
                        anticipated_speed(ctx.right.lead, p.vf);
    if (cost < 0.5 * p.lcKeepRight && admissible(ctx.right)) {
      d.direction = LcDirection::Right;
      return d;
    }
  }
  return d;
}

Simulation::Simulation(const ScenarioConfig& scenario, const ParameterSet& params)
    : scenario_(scenario), params_(params) {
  scenario_.validate();
  params_.validate();
  log_.dt = scenario_.dt;
  log_.horizon = scenario_.horizon;
  log_.vehicle_length = scenario_.vehicle_length;
  const std::size_t norig = scenario_.demand.num_origins();
  origins_.resize(norig);
  dest_rngs_.reserve(norig);
  for (std::size_t o = 0; o < norig; ++o) {
    origins_[o].schedule =
        sample_arrivals(scenario_.demand, o, scenario_.horizon, scenario_.seed);
    std::seed_seq seq{static_cast<std::uint64_t>(0xdee5u), scenario_.seed,
                      static_cast<std::uint64_t>(o)};
    dest_rngs_.emplace_back(seq);
  }
  insert_arrivals();
  record_samples();
}

int Simulation::add_vehicle(int lane, double position, double speed,
                            int destination) {
  Vehicle v;
  v.id = next_id_++;
  v.lane = lane;
  v.position = position;
  v.speed = speed;
  v.length = scenario_.vehicle_length;
  v.destination = destination;
  vehicles_.push_back(v);
  ++inserted_;
  VehicleTrace trace;
  trace.id = v.id;
  trace.insert_time = time_;
  trace.samples.push_back({time_, position, speed, lane});
  log_.vehicles.push_back(std::move(trace));
  return v.id;
}

const Vehicle* Simulation::find_leader(int lane, double position, int skip_id) const {
  const Vehicle* best = nullptr;
  for (const auto& v : vehicles_) {
    if (v.lane != lane || v.id == skip_id) continue;
    if (v.position <= position) continue;
    if (!best || v.position < best->position) best = &v;
  }
  return best;
}

const Vehicle* Simulation::find_follower(int lane, double position, int skip_id) const {
  const Vehicle* best = nullptr;
  for (const auto& v : vehicles_) {
    if (v.lane != lane || v.id == skip_id) continue;
    if (v.position > position) continue;
    if (!best || v.position > best->position) best = &v;
  }
  return best;
}

LeaderContext Simulation::leader_context(const Vehicle& v) const {
  LeaderContext lc;
  if (const Vehicle* lead = find_leader(v.lane, v.position, v.id)) {
    lc.exists = true;
    lc.gap = lead->position - lead->length - v.position;
    lc.dv = v.speed - lead->speed;
    lc.leader_speed = lead->speed;
  }
  return lc;
}

AdjacentLane Simulation::adjacent_lane(const Vehicle& v, int target_lane) const {
  AdjacentLane adj;
  if (!scenario_.network.lane_exists(target_lane, v.position)) return adj;
  adj.exists = true;
  adj.discretionary_allowed = !scenario_.network.is_accel_lane(target_lane);
  if (const Vehicle* lead = find_leader(target_lane, v.position, v.id)) {
    adj.lead.exists = true;
    adj.lead.gap = lead->position - lead->length - v.position;
    adj.lead.dv = v.speed - lead->speed;
    adj.lead.leader_speed = lead->speed;
  }
  if (const Vehicle* lag = find_follower(target_lane, v.position, v.id)) {
    adj.rear_exists = true;
    adj.rear_gap = v.position - v.length - lag->position;
    adj.rear_speed = lag->speed;
  }
  return adj;
}

LcContext Simulation::build_context(const Vehicle& v) const {
  LcContext ctx;
  ctx.speed = v.speed;
  ctx.cooldown = v.cooldown;
  ctx.current_lead = leader_context(v);
  ctx.speed_gain_held = v.speed_gain_held;
  ctx.speed_gain_direction = v.speed_gain_direction;

  const auto& net = scenario_.network;
  if (net.is_accel_lane(v.lane)) {
    // Merge target is the rightmost mainline lane; expose it as "left".
    ctx.left = adjacent_lane(v, 0);
    ctx.mandatory_changes = 1;
    ctx.mandatory_direction = LcDirection::Left;
    for (const auto& r : net.onramps)
      if (r.accel_lane == v.lane)
        ctx.mandatory_distance = std::max(r.merge_end - v.position, 0.0);
  } else {
    if (v.lane + 1 < net.mainline_lanes) ctx.left = adjacent_lane(v, v.lane + 1);
    if (v.lane - 1 >= 0) ctx.right = adjacent_lane(v, v.lane - 1);
    if (v.destination >= 0 &&
        v.destination < static_cast<int>(net.offramps.size())) {
      const auto& ramp = net.offramps[v.destination];
      if (v.position < ramp.position && v.lane != ramp.exit_lane) {
        ctx.mandatory_changes = std::abs(v.lane - ramp.exit_lane);
        ctx.mandatory_direction =
            ramp.exit_lane < v.lane ? LcDirection::Right : LcDirection::Left;
        ctx.mandatory_distance = ramp.position - v.position;
      }
    }
  }
  return ctx;
}

const Vehicle* Simulation::vehicle_by_id(int id) const {
  if (id < 0) return nullptr;
  for (const auto& o : vehicles_)
    if (o.id == id) return &o;
  return nullptr;
}

// Picks (or keeps) the slot in the target lane a blocked mandatory changer
// lines up on, identified by the vehicle bounding the slot ahead. A sticky
// choice matters: re-picking every step makes the ego churn between slots
// and never finish opening any of them.
void Simulation::choose_slot(Vehicle& v, int target_lane) {
  if (params_.lcAssertive <= 0) {
    v.seek_target = -1;
    return;
  }
  // Keep the current target while it remains plausible to settle behind.
  if (const Vehicle* cur = vehicle_by_id(v.seek_target)) {
    if (cur->lane == target_lane &&
        cur->position - cur->length - v.position > -60.0 &&
        cur->position - v.position < 120.0)
      return;
  }
  v.seek_target = -1;

  // Target-lane vehicles near the ego, sorted upstream to downstream.
  std::vector<const Vehicle*> others;
  for (const auto& o : vehicles_)
    if (o.lane == target_lane && o.id != v.id &&
        std::abs(o.position - v.position) < 250.0)
      others.push_back(&o);
  std::sort(others.begin(), others.end(),
            [](const Vehicle* a, const Vehicle* b) {
              return a->position < b->position;
            });

  // Scan the slots between consecutive vehicles (plus the open ends) for one
  // long enough to admit the ego, preferring the slot nearest the ego that
  // does not require a long chase to reach.
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= others.size(); ++k) {
    const Vehicle* rear = k > 0 ? others[k - 1] : nullptr;
    const Vehicle* lead = k < others.size() ? others[k] : nullptr;
    if (!lead) continue;  // open road ahead needs no alignment
    double need_front =
        idm_desired_gap(v.speed, v.speed - lead->speed, params_) /
        params_.lcAssertive;
    if (rear) {
      const double need_rear =
          idm_desired_gap(rear->speed, rear->speed - v.speed, params_) /
          params_.lcAssertive;
      const double space = lead->position - lead->length - rear->position;
      if (space - v.length < need_front + need_rear) continue;
    }
    const double anchor = lead->position - lead->length - need_front;
    if (anchor > v.position + 5.0 || anchor < v.position - 60.0) continue;
    const double dist = std::abs(v.position - anchor);
    if (dist < best_dist) {
      best_dist = dist;
      v.seek_target = lead->id;
    }
  }
}

// Regulates a blocked mandatory changer's speed so it converges into its
// chosen slot instead of stalling beside traffic.
double Simulation::gap_seek_accel(const Vehicle& v, int target_lane,
                                  double acc) const {
  const Vehicle* slot_lead = vehicle_by_id(v.seek_target);
  if (slot_lead && slot_lead->lane == target_lane) {
    const double gap = slot_lead->position - slot_lead->length - v.position;
    if (gap > 0) {
      // Following the slot's lead vehicle on a shrunk gap settles the ego
      // just beyond the admissible front distance (s*/lcAssertive) rather
      // than at its own desired gap s*.
      const double eff = gap * std::min(params_.lcAssertive, 1.0) * 0.9;
      acc = std::min(acc, idm_acceleration(v.speed, v.speed - slot_lead->speed,
                                           std::max(eff, 0.01), true, params_));
    } else if (v.speed > slot_lead->speed - 3.0) {
      // Drop behind the slot, but never bleed far below the stream speed.
      acc = std::min(acc, -0.5 * params_.b);
    }
    return acc;
  }
  // No slot lined up: drift gently back relative to the adjacent stream until
  // one appears, without falling far below its pace.
  if (const Vehicle* lag = find_follower(target_lane, v.position, v.id))
    if (v.speed > lag->speed - 1.0) acc = std::min(acc, -0.5 * params_.b);
  return acc;
}

double Simulation::accel_for(const Vehicle& v, const Vehicle* coop_for,
                             int seek_lane, double wait_cap) const {
  const LeaderContext lc = leader_context(v);
  const double own = idm_acceleration(v.speed, lc.dv, std::max(lc.gap, 0.01),
                                      lc.exists, params_);
  double acc = own;
  // End of an acceleration lane acts as a standing virtual leader.
  if (scenario_.network.is_accel_lane(v.lane)) {
    for (const auto& r : scenario_.network.onramps) {
      if (r.accel_lane != v.lane) continue;
      const double gap_end = std::max(r.merge_end - v.position, 0.01);
      acc = std::min(acc, idm_acceleration(v.speed, v.speed, gap_end, true, params_));
    }
  }
  if (seek_lane >= 0) acc = gap_seek_accel(v, seek_lane, acc);
  if (coop_for) {
    // Yield to the merger as if it were already ahead in this lane, but brake
    // no harder than lcCooperative*b below the unforced acceleration.
    const double gap = coop_for->position - coop_for->length - v.position;
    if (gap > 0) {
      // Shrinking the gap makes the follower settle just beyond the
      // admissible rear distance (s*/lcAssertive), not its own desired gap.
      // The shrink is floored: a cooperative driver opens at most a bit over
      // twice the desired gap, however demanding the merger is.
      const double eff =
          gap * std::max(0.9 * std::min(params_.lcAssertive, 1.0), 0.45);
      const double virt = idm_acceleration(v.speed, v.speed - coop_for->speed,
                                           std::max(eff, 0.01), true, params_);
      acc = std::min(acc, std::max(virt, own - params_.lcCooperative * params_.b));
    }
  }
  acc = std::min(acc, wait_cap);
  return std::max(acc, -ParameterSet::kEmergencyDecel);
}

void Simulation::apply_lane_changes(const std::vector<LcDecision>& decisions,
                                    std::vector<double>& wait_cap,
                                    std::vector<std::pair<int, int>>& coop_pairs,
                                    std::vector<int>& seek_lanes) {
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    Vehicle& v = vehicles_[i];
    const LcDecision& d = decisions[i];
    if (d.direction != LcDirection::Stay) {
      int target_lane;
      if (scenario_.network.is_accel_lane(v.lane)) {
        target_lane = 0;
      } else {
        target_lane = v.lane + (d.direction == LcDirection::Left ? 1 : -1);
      }
      // Recheck against the partially updated state so two simultaneous
      // movers cannot land in the same slot.
      const AdjacentLane adj = adjacent_lane(v, target_lane);
      if (adj.exists &&
          lane_change_admissible(v.speed, adj.lead, adj.rear_exists, adj.rear_gap,
                                 adj.rear_speed, params_)) {
        v.lane = target_lane;
        v.cooldown = kCooldown;
        v.speed_gain_held = 0.0;
        v.speed_gain_direction = LcDirection::Stay;
        v.seek_target = -1;
        continue;
      }
    }
    if (d.request_cooperation) {
      // On an acceleration lane the ego keeps speed authority so it can match
      // the mainline; elsewhere it must not accelerate while waiting.
      if (!scenario_.network.is_accel_lane(v.lane)) wait_cap[i] = 0.0;
      int target_lane = scenario_.network.is_accel_lane(v.lane) ? 0 : v.lane;
      if (!scenario_.network.is_accel_lane(v.lane) &&
          decisions[i].urgency >= 1.0 && v.destination >= 0) {
        const auto& ramp = scenario_.network.offramps[v.destination];
        target_lane = v.lane + (ramp.exit_lane < v.lane ? -1 : 1);
      }
      seek_lanes[i] = target_lane;
      choose_slot(v, target_lane);
      // Cooperation comes from the vehicle bounding the targeted slot from
      // behind; without a slot, from whoever is currently behind the ego.
      const Vehicle* lag = nullptr;
      if (const Vehicle* slot_lead = vehicle_by_id(v.seek_target))
        lag = find_follower(target_lane,
                            slot_lead->position - slot_lead->length - 1e-9,
                            v.id);
      else
        lag = find_follower(target_lane, v.position, v.id);
      if (lag) coop_pairs.emplace_back(lag->id, v.id);
    } else {
      v.seek_target = -1;
    }
  }
}

void Simulation::step() {
  const double dt = scenario_.dt;

  // Update discretionary speed-gain timers from the pre-step state.
  for (auto& v : vehicles_) {
    LcDirection dir = LcDirection::Stay;
    if (params_.lcSpeedGain > 0 && !scenario_.network.is_accel_lane(v.lane)) {
      const double threshold = 1.0 / params_.lcSpeedGain;
      const LeaderContext cur = leader_context(v);
      const double here = anticipated_speed(cur, params_.vf);
      double best_gain = threshold;
      if (v.lane + 1 < scenario_.network.mainline_lanes) {
        const AdjacentLane left = adjacent_lane(v, v.lane + 1);
        if (left.exists) {
          const double gain = anticipated_speed(left.lead, params_.vf) - here;
          if (gain > best_gain) {
            best_gain = gain;
            dir = LcDirection::Left;
          }
        }
      }
      if (v.lane - 1 >= 0) {
        const AdjacentLane right = adjacent_lane(v, v.lane - 1);
        if (right.exists && right.discretionary_allowed) {
          const double gain = anticipated_speed(right.lead, params_.vf) - here;
          if (gain > best_gain) {
            best_gain = gain;
            dir = LcDirection::Right;
          }
        }
      }
    }
    if (dir != LcDirection::Stay && dir == v.speed_gain_direction) {
      v.speed_gain_held += dt;
    } else {
      v.speed_gain_direction = dir;
      v.speed_gain_held = dir == LcDirection::Stay ? 0.0 : dt;
    }
  }

  // Phase 1: decisions from the pre-step state, applied in id order.
  std::vector<LcDecision> decisions(vehicles_.size());
  for (std::size_t i = 0; i < vehicles_.size(); ++i)
    decisions[i] = lane_change_decide(build_context(vehicles_[i]), params_);

  std::vector<double> wait_cap(vehicles_.size(),
                               std::numeric_limits<double>::infinity());
  std::vector<std::pair<int, int>> coop_pairs;  // (follower id, merger id)
  std::vector<int> seek_lanes(vehicles_.size(), -1);
  apply_lane_changes(decisions, wait_cap, coop_pairs, seek_lanes);

  auto by_id = [this](int id) -> const Vehicle* {
    for (const auto& o : vehicles_)
      if (o.id == id) return &o;
    return nullptr;
  };

  // Phase 2: accelerations from the post-change state.
  std::vector<double> acc(vehicles_.size());
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const Vehicle* coop_for = nullptr;
    for (const auto& [fol, merger] : coop_pairs)
      if (fol == vehicles_[i].id) {
        coop_for = by_id(merger);
        break;
      }
    acc[i] = accel_for(vehicles_[i], coop_for, seek_lanes[i], wait_cap[i]);
  }

  // Phase 3: ballistic update, re-clamped so speeds stay nonnegative.
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    Vehicle& v = vehicles_[i];
    double a = acc[i];
    if (v.speed + a * dt < 0) a = -v.speed / dt;
    v.position += v.speed * dt + 0.5 * a * dt * dt;
    v.speed = std::max(0.0, v.speed + a * dt);
    v.cooldown = std::max(0.0, v.cooldown - dt);
    // An unmerged vehicle holds at the end of its acceleration lane.
    if (scenario_.network.is_accel_lane(v.lane)) {
      for (const auto& r : scenario_.network.onramps) {
        if (r.accel_lane == v.lane && v.position > r.merge_end) {
          v.position = r.merge_end;
          v.speed = 0.0;
        }
      }
    }
  }

  time_ += dt;
  ++step_count_;

  // Phase 4: removals.
  for (auto it = vehicles_.begin(); it != vehicles_.end();) {
    Vehicle& v = *it;
    bool exits = v.position - v.length > scenario_.network.length;
    if (!exits && v.destination >= 0 &&
        v.destination < static_cast<int>(scenario_.network.offramps.size())) {
      const auto& ramp = scenario_.network.offramps[v.destination];
      if (v.position >= ramp.position) {
        if (v.lane == ramp.exit_lane) {
          exits = true;
        } else {
          v.destination = -1;  // missed the exit, continue on the mainline
        }
      }
    }
    if (exits) {
      log_.vehicles[v.id].exit_time = time_;
      ++exited_;
      it = vehicles_.erase(it);
    } else {
      ++it;
    }
  }

  // Phase 5: insertions, then bookkeeping.
  insert_arrivals();
  record_samples();
  check_collisions();
}

void Simulation::run_to_end() {
  const long steps = std::lround(scenario_.horizon / scenario_.dt);
  while (step_count_ < steps) step();
}

std::size_t Simulation::queued_count() const {
  std::size_t n = 0;
  for (const auto& o : origins_) n += o.waiting_dest.size();
  return n;
}

int Simulation::sample_destination(std::mt19937_64& rng) {
  const auto& splits = scenario_.demand.offramp_splits;
  if (splits.empty()) return -1;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng);
  for (std::size_t k = 0; k < splits.size(); ++k) {
    if (u < splits[k]) return static_cast<int>(k);
    u -= splits[k];
  }
  return -1;
}

bool Simulation::try_insert(std::size_t origin, int destination) {
  const auto& net = scenario_.network;
  if (origin == 0) {
    // Upstream mainline: pick the feasible lane with the largest entry gap.
    int best_lane = -1;
    double best_gap = -1.0;
    double best_speed = 0.0;
    for (int lane = 0; lane < net.mainline_lanes; ++lane) {
      const Vehicle* lead = find_leader(lane, -1e-9, -1);
      double gap = std::numeric_limits<double>::infinity();
      double speed = params_.vf;
      if (lead) {
        gap = lead->position - lead->length;
        speed = std::min(params_.vf, lead->speed);
      }
      if (gap < idm_desired_gap(speed, 0.0, params_)) continue;
      if (gap > best_gap) {
        best_gap = gap;
        best_lane = lane;
        best_speed = speed;
      }
    }
    if (best_lane < 0) return false;
    add_vehicle(best_lane, 0.0, best_speed, destination);
    return true;
  }
  const auto& ramp = net.onramps[origin - 1];
  const Vehicle* lead = find_leader(ramp.accel_lane, ramp.merge_start - 1e-9, -1);
  double gap = ramp.merge_end - ramp.merge_start;
  double speed = params_.vf;
  if (lead) {
    gap = lead->position - lead->length - ramp.merge_start;
    speed = std::min(params_.vf, lead->speed);
  }
  if (gap < idm_desired_gap(speed, 0.0, params_)) return false;
  add_vehicle(ramp.accel_lane, ramp.merge_start, speed, destination);
  return true;
}

void Simulation::insert_arrivals() {
  for (std::size_t o = 0; o < origins_.size(); ++o) {
    OriginQueue& q = origins_[o];
    while (q.next < q.schedule.size() && q.schedule[q.next] <= time_) {
      q.waiting_dest.push_back(sample_destination(dest_rngs_[o]));
      ++q.next;
    }
    // Queued demand drains FIFO; it is retained, never dropped.
    while (!q.waiting_dest.empty() && try_insert(o, q.waiting_dest.front()))
      q.waiting_dest.erase(q.waiting_dest.begin());
  }
}

void Simulation::record_samples() {
  for (const auto& v : vehicles_) {
    auto& trace = log_.vehicles[v.id];
    if (!trace.samples.empty() && trace.samples.back().t >= time_) continue;
    trace.samples.push_back({time_, v.position, v.speed, v.lane});
  }
}

void Simulation::check_collisions() const {
  const int max_lane =
      scenario_.network.mainline_lanes + static_cast<int>(scenario_.network.onramps.size());
  for (int lane = 0; lane < max_lane; ++lane) {
    std::vector<const Vehicle*> in_lane;
    for (const auto& v : vehicles_)
      if (v.lane == lane) in_lane.push_back(&v);
    std::sort(in_lane.begin(), in_lane.end(),
              [](const Vehicle* a, const Vehicle* b) { return a->position < b->position; });
    for (std::size_t i = 1; i < in_lane.size(); ++i) {
      const double gap =
          in_lane[i]->position - in_lane[i]->length - in_lane[i - 1]->position;
      if (gap < -1e-9)
        throw CollisionError(in_lane[i - 1]->id, in_lane[i]->id, time_);
    }
  }
}

TrajectoryLog run(const ScenarioConfig& scenario, const ParameterSet& params) {
  Simulation sim(scenario, params);
  sim.run_to_end();
  return sim.take_log();
}

std::string trajectory_to_csv(const TrajectoryLog& log, int decimate) {
  if (decimate < 1) throw std::invalid_argument("decimate must be >= 1");
  std::ostringstream out;
  out.precision(10);
  out << "time_s,vehicle_id,lane,position_m,speed_mps\n";
  for (const auto& trace : log.vehicles) {
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
      if (k % decimate != 0 && k + 1 != trace.samples.size()) continue;
      const auto& s = trace.samples[k];
      out << s.t << "," << trace.id << "," << s.lane << "," << s.position << ","
          << s.speed << "\n";
    }
  }
  return out.str();
}

void save_trajectory(const TrajectoryLog& log, const std::string& path,
                     int decimate) {
  io::atomic_write(path, trajectory_to_csv(log, decimate));
}

TrajectoryLog load_trajectory(const std::string& path) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file");
  std::map<int, VehicleTrace> traces;
  int lineno = 1;
  double max_t = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split_csv(line);
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (f.size() != 5) throw std::runtime_error(ctx + ": expected 5 columns");
    TrajectorySample s;
    s.t = io::parse_double(f[0], ctx);
    const int id = static_cast<int>(io::parse_long(f[1], ctx));
    s.lane = static_cast<int>(io::parse_long(f[2], ctx));
    s.position = io::parse_double(f[3], ctx);
    s.speed = io::parse_double(f[4], ctx);
    auto& trace = traces[id];
    trace.id = id;
    if (!trace.samples.empty() && s.t <= trace.samples.back().t)
      throw std::runtime_error(ctx + ": non-increasing time for vehicle " +
                               std::to_string(id));
    trace.samples.push_back(s);
    max_t = std::max(max_t, s.t);
  }
  TrajectoryLog log;
  log.horizon = max_t;
  double min_dt = 0.1;
  for (auto& [id, trace] : traces) {
    trace.insert_time = trace.samples.front().t;
    trace.exit_time = trace.samples.back().t;
    if (trace.samples.size() >= 2)
      min_dt = std::min(min_dt, trace.samples[1].t - trace.samples[0].t);
    log.vehicles.push_back(std::move(trace));
  }
  log.dt = min_dt;
  return log;
}

}  // namespace mcal
