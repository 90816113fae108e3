#include "mcal/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mcal/io.hpp"

namespace mcal {

int RoadNetwork::lanes_at(double x) const {
  int n = mainline_lanes;
  for (const auto& r : onramps)
    if (x >= r.merge_start && x <= r.merge_end) ++n;
  return n;
}

bool RoadNetwork::lane_exists(int lane, double x) const {
  if (lane < 0) return false;
  if (lane < mainline_lanes) return x >= 0.0 && x <= length;
  for (const auto& r : onramps)
    if (r.accel_lane == lane) return x >= r.merge_start && x <= r.merge_end;
  return false;
}

void RoadNetwork::validate() const {
  if (!(length > 0)) throw std::invalid_argument("network.length_m: must be > 0");
  if (mainline_lanes < 1)
    throw std::invalid_argument("network.mainline_lanes: must be >= 1");
  for (std::size_t i = 0; i < onramps.size(); ++i) {
    const auto& r = onramps[i];
    if (r.merge_start < 0 || r.merge_end > length)
      throw std::invalid_argument("network.onramp[" + std::to_string(i) +
                                  "]: merge zone outside [0, length]");
    if (!(r.merge_start < r.merge_end))
      throw std::invalid_argument("network.onramp[" + std::to_string(i) +
                                  "]: merge_start must be < merge_end");
    if (r.accel_lane < mainline_lanes)
      throw std::invalid_argument("network.onramp[" + std::to_string(i) +
                                  "]: accel_lane must be >= mainline_lanes");
  }
  for (std::size_t i = 0; i < offramps.size(); ++i) {
    const auto& r = offramps[i];
    if (r.position < 0 || r.position > length)
      throw std::invalid_argument("network.offramp[" + std::to_string(i) +
                                  "]: position outside [0, length]");
    if (r.exit_lane < 0 || r.exit_lane >= mainline_lanes)
      throw std::invalid_argument("network.offramp[" + std::to_string(i) +
                                  "]: exit_lane out of range");
  }
}

double DemandProfile::rate_at(std::size_t origin, double t) const {
  const std::vector<double>* rates = nullptr;
  if (origin == 0) {
    rates = &mainline_rates;
  } else if (origin - 1 < onramp_rates.size()) {
    rates = &onramp_rates[origin - 1];
  } else {
    throw std::invalid_argument("unknown origin id " + std::to_string(origin));
  }
  if (rates->empty()) return 0.0;
  auto bin = static_cast<std::size_t>(std::floor(t / bin_width));
  bin = std::min(bin, rates->size() - 1);
  return (*rates)[bin];
}

void DemandProfile::validate(double horizon, std::size_t num_onramps,
                             std::size_t num_offramps) const {
  if (!(bin_width > 0)) throw std::invalid_argument("demand.bin_s: must be > 0");
  const double bins = horizon / bin_width;
  if (std::abs(bins - std::round(bins)) > 1e-9)
    throw std::invalid_argument("demand.bin_s: bin width must divide the horizon");
  const auto nbins = static_cast<std::size_t>(std::llround(bins));
  auto check_rates = [&](const std::vector<double>& r, const std::string& name) {
    if (r.size() != nbins)
      throw std::invalid_argument("demand." + name + ": expected " +
                                  std::to_string(nbins) + " bin rates, got " +
                                  std::to_string(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
      if (!(r[i] >= 0))
        throw std::invalid_argument("demand." + name + ": negative rate in bin " +
                                    std::to_string(i));
  };
  check_rates(mainline_rates, "mainline");
  if (onramp_rates.size() != num_onramps)
    throw std::invalid_argument("demand: expected " + std::to_string(num_onramps) +
                                " onramp rate rows, got " +
                                std::to_string(onramp_rates.size()));
  for (std::size_t k = 0; k < onramp_rates.size(); ++k)
    check_rates(onramp_rates[k], "onramp[" + std::to_string(k) + "]");
  if (offramp_splits.size() != num_offramps)
    throw std::invalid_argument("demand: expected " + std::to_string(num_offramps) +
                                " offramp splits, got " +
                                std::to_string(offramp_splits.size()));
  double total = 0.0;
  for (std::size_t k = 0; k < offramp_splits.size(); ++k) {
    if (!(offramp_splits[k] >= 0 && offramp_splits[k] <= 1))
      throw std::invalid_argument("demand.offramp_split[" + std::to_string(k) +
                                  "]: must be in [0,1]");
    total += offramp_splits[k];
  }
  if (total > 1.0 + 1e-12)
    throw std::invalid_argument("demand: offramp splits sum to more than 1");
}

void ScenarioConfig::validate() const {
  network.validate();
  if (!(horizon > 0)) throw std::invalid_argument("simulation.horizon_s: must be > 0");
  if (!(dt > 0) || dt > 0.5)
    throw std::invalid_argument("simulation.dt_s: must be in (0, 0.5]");
  if (!(vehicle_length > 0))
    throw std::invalid_argument("simulation.vehicle_length_m: must be > 0");
  demand.validate(horizon, network.onramps.size(), network.offramps.size());
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const auto& d = detectors[i];
    if (d.position < 0 || d.position > network.length)
      throw std::invalid_argument("detectors[" + std::to_string(i) +
                                  "]: position " + std::to_string(d.position) +
                                  " outside [0, " + std::to_string(network.length) + "]");
    if (!(d.window > 0))
      throw std::invalid_argument("detectors[" + std::to_string(i) +
                                  "]: aggregation window must be > 0");
    for (int lane : d.lanes)
      if (!network.lane_exists(lane, d.position))
        throw std::invalid_argument("detectors[" + std::to_string(i) +
                                    "]: lane " + std::to_string(lane) +
                                    " does not exist at its position");
  }
  defaults.validate();
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& value, const std::string& ctx) {
  std::vector<double> out;
  std::istringstream ss(value);
  std::string tok;
  while (ss >> tok) out.push_back(io::parse_double(tok, ctx));
  return out;
}

struct Entry {
  std::string key;
  std::string value;
  int line;
};

using Sections = std::map<std::string, std::vector<Entry>>;

Sections tokenize(const std::string& text) {
  Sections sections;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": malformed section header");
      current = line.substr(1, line.size() - 2);
      sections[current];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": expected key = value");
    if (current.empty())
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": key outside any section");
    sections[current].push_back({trim(line.substr(0, eq)),
                                 trim(line.substr(eq + 1)), lineno});
  }
  return sections;
}

// Single-valued lookup with a default.
double get_scalar(const Sections& s, const std::string& sec, const std::string& key,
                  bool required, double fallback) {
  auto it = s.find(sec);
  if (it == s.end()) {
    if (required) throw std::runtime_error("missing section [" + sec + "]");
    return fallback;
  }
  const Entry* found = nullptr;
  for (const auto& e : it->second)
    if (e.key == key) found = &e;
  if (!found) {
    if (required)
      throw std::runtime_error("missing key " + key + " in [" + sec + "]");
    return fallback;
  }
  return io::parse_double(found->value, "[" + sec + "]." + key);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  const Sections s = tokenize(text);
  ScenarioConfig sc;

  sc.network.length = get_scalar(s, "network", "length_m", true, 0);
  sc.network.mainline_lanes =
      static_cast<int>(get_scalar(s, "network", "mainline_lanes", true, 0));
  if (auto it = s.find("network"); it != s.end()) {
    for (const auto& e : it->second) {
      if (e.key == "onramp") {
        auto v = parse_numbers(e.value, "network.onramp");
        if (v.size() != 2 && v.size() != 3)
          throw std::runtime_error("network.onramp: expected 'start end [lane]'");
        OnRamp r;
        r.merge_start = v[0];
        r.merge_end = v[1];
        r.accel_lane = v.size() == 3
                           ? static_cast<int>(v[2])
                           : sc.network.mainline_lanes +
                                 static_cast<int>(sc.network.onramps.size());
        sc.network.onramps.push_back(r);
      } else if (e.key == "offramp") {
        auto v = parse_numbers(e.value, "network.offramp");
        if (v.size() != 2)
          throw std::runtime_error("network.offramp: expected 'position exit_lane'");
        sc.network.offramps.push_back({v[0], static_cast<int>(v[1])});
      }
    }
  }

  sc.demand.bin_width = get_scalar(s, "demand", "bin_s", true, 0);
  if (auto it = s.find("demand"); it != s.end()) {
    for (const auto& e : it->second) {
      if (e.key == "mainline")
        sc.demand.mainline_rates = parse_numbers(e.value, "demand.mainline");
      else if (e.key == "onramp")
        sc.demand.onramp_rates.push_back(parse_numbers(e.value, "demand.onramp"));
      else if (e.key == "offramp_split")
        sc.demand.offramp_splits.push_back(
            io::parse_double(e.value, "demand.offramp_split"));
    }
  }

  if (auto it = s.find("detectors"); it != s.end()) {
    for (const auto& e : it->second) {
      if (e.key != "detector") continue;
      auto v = parse_numbers(e.value, "detectors.detector");
      if (v.size() < 2)
        throw std::runtime_error("detectors.detector: expected 'position window [lanes...]'");
      DetectorSpec d;
      d.position = v[0];
      d.window = v[1];
      for (std::size_t k = 2; k < v.size(); ++k)
        d.lanes.push_back(static_cast<int>(v[k]));
      sc.detectors.push_back(d);
    }
  }

  sc.horizon = get_scalar(s, "simulation", "horizon_s", true, 0);
  sc.dt = get_scalar(s, "simulation", "dt_s", false, 0.1);
  sc.seed = static_cast<std::uint64_t>(get_scalar(s, "simulation", "seed", false, 1));
  sc.vehicle_length =
      get_scalar(s, "simulation", "vehicle_length_m", false, 5.0);

  ParameterSet p = ParameterSet::defaults();
  if (auto it = s.find("defaults"); it != s.end()) {
    for (const auto& e : it->second) {
      auto v = p.to_vector();
      bool known = false;
      for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i) {
        if (e.key == ParameterSet::name(i)) {
          v[i] = io::parse_double(e.value, "[defaults]." + e.key);
          known = true;
          break;
        }
      }
      if (!known)
        throw std::runtime_error("unknown parameter in [defaults]: " + e.key);
      p = ParameterSet::from_vector(v);
    }
  }
  sc.defaults = p;

  // Resolve detectors with no explicit lane list to every lane present there.
  for (auto& d : sc.detectors) {
    if (d.lanes.empty()) {
      for (int lane = 0;
           lane < sc.network.mainline_lanes + static_cast<int>(sc.network.onramps.size());
           ++lane)
        if (sc.network.lane_exists(lane, d.position)) d.lanes.push_back(lane);
    }
  }

  sc.validate();
  return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
  return parse_scenario(io::read_file(path));
}

std::string serialize_scenario(const ScenarioConfig& sc) {
  std::ostringstream out;
  out.precision(15);
  out << "[network]\n";
  out << "length_m = " << sc.network.length << "\n";
  out << "mainline_lanes = " << sc.network.mainline_lanes << "\n";
  for (const auto& r : sc.network.onramps)
    out << "onramp = " << r.merge_start << " " << r.merge_end << " "
        << r.accel_lane << "\n";
  for (const auto& r : sc.network.offramps)
    out << "offramp = " << r.position << " " << r.exit_lane << "\n";
  out << "\n[demand]\n";
  out << "bin_s = " << sc.demand.bin_width << "\n";
  out << "mainline =";
  for (double q : sc.demand.mainline_rates) out << " " << q;
  out << "\n";
  for (const auto& rates : sc.demand.onramp_rates) {
    out << "onramp =";
    for (double q : rates) out << " " << q;
    out << "\n";
  }
  for (double f : sc.demand.offramp_splits) out << "offramp_split = " << f << "\n";
  out << "\n[detectors]\n";
  for (const auto& d : sc.detectors) {
    out << "detector = " << d.position << " " << d.window;
    for (int lane : d.lanes) out << " " << lane;
    out << "\n";
  }
  out << "\n[simulation]\n";
  out << "horizon_s = " << sc.horizon << "\n";
  out << "dt_s = " << sc.dt << "\n";
  out << "seed = " << sc.seed << "\n";
  out << "vehicle_length_m = " << sc.vehicle_length << "\n";
  out << "\n[defaults]\n";
  const auto v = sc.defaults.to_vector();
  for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i)
    out << ParameterSet::name(i) << " = " << v[i] << "\n";
  return out.str();
}

void save_scenario(const ScenarioConfig& sc, const std::string& path) {
  io::atomic_write(path, serialize_scenario(sc));
}

ScenarioConfig build_synthetic_merge() {
  ScenarioConfig sc;
  sc.network.length = 1300.0;
  sc.network.mainline_lanes = 2;
  sc.network.onramps.push_back({800.0, 1100.0, 2});
  sc.demand.bin_width = 480.0;
  // Constant demand sized so combined mainline + ramp flow exceeds the
  // two-lane downstream capacity and the merge bottleneck activates.
  sc.demand.mainline_rates = {3000.0};
  sc.demand.onramp_rates = {{900.0}};
  sc.detectors = {{700.0, {}, 50.0}, {900.0, {}, 50.0}, {1150.0, {}, 50.0}};
  sc.horizon = 480.0;
  sc.dt = 0.1;
  sc.seed = 1;
  sc.defaults = ParameterSet::defaults();
  sc.vehicle_length = 5.0;
  for (auto& d : sc.detectors)
    for (int lane = 0; lane < 3; ++lane)
      if (sc.network.lane_exists(lane, d.position)) d.lanes.push_back(lane);
  sc.validate();
  return sc;
}

std::vector<double> sample_arrivals(const DemandProfile& demand,
                                    std::size_t origin, double horizon,
                                    std::uint64_t seed) {
  if (origin >= demand.num_origins())
    throw std::invalid_argument("unknown origin id " + std::to_string(origin));
  std::seed_seq seq{static_cast<std::uint64_t>(0x5eedu), seed,
                    static_cast<std::uint64_t>(origin)};
  std::mt19937_64 rng(seq);
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> times;
  const auto nbins =
      static_cast<std::size_t>(std::ceil(horizon / demand.bin_width - 1e-9));
  for (std::size_t bin = 0; bin < nbins; ++bin) {
    const double t0 = bin * demand.bin_width;
    const double t1 = std::min(horizon, t0 + demand.bin_width);
    const double rate = demand.rate_at(origin, t0) / 3600.0;  // veh/s
    if (rate <= 0) continue;
    double t = t0;
    for (;;) {
      t += exp1(rng) / rate;
      if (t >= t1) break;
      times.push_back(t);
    }
  }
  return times;
}

}  // namespace mcal
