#include "mcal/params.hpp"

#include <cmath>
#include <stdexcept>

namespace mcal {

namespace {
constexpr const char* kNames[ParameterSet::kNumParams] = {
    "vf", "sj", "tau", "a", "b",
    "lcStrategic", "lcCooperative", "lcAssertive", "lcSpeedGain", "lcKeepRight"};
}

std::array<double, ParameterSet::kNumParams> ParameterSet::to_vector() const {
  return {vf, sj, tau, a, b,
          lcStrategic, lcCooperative, lcAssertive, lcSpeedGain, lcKeepRight};
}

ParameterSet ParameterSet::from_vector(const std::array<double, kNumParams>& v) {
  ParameterSet p;
  p.vf = v[0];
  p.sj = v[1];
  p.tau = v[2];
  p.a = v[3];
  p.b = v[4];
  p.lcStrategic = v[5];
  p.lcCooperative = v[6];
  p.lcAssertive = v[7];
  p.lcSpeedGain = v[8];
  p.lcKeepRight = v[9];
  return p;
}

const char* ParameterSet::name(std::size_t index) { return kNames[index]; }

ParameterSet ParameterSet::defaults() {
  ParameterSet p;
  p.vf = 32.0;
  p.sj = 2.5;
  p.tau = 1.0;
  p.a = 2.6;
  p.b = 4.5;
  p.lcStrategic = 1.0;
  p.lcCooperative = 1.0;
  p.lcAssertive = 1.0;
  p.lcSpeedGain = 1.0;
  p.lcKeepRight = 1.0;
  return p;
}

ParameterSet ParameterSet::ground_truth() {
  ParameterSet p;
  p.vf = 30.55;
  p.sj = 2.5;
  p.tau = 1.4;
  p.a = 1.5;
  p.b = 2.0;
  p.lcStrategic = 1.0;
  p.lcCooperative = 1.0;
  p.lcAssertive = 0.5;
  p.lcSpeedGain = 1.0;
  p.lcKeepRight = 0.5;
  return p;
}

void ParameterSet::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ParameterSet.") + field + ": " + what);
  };
  auto finite = [&](double x, const char* field) {
    require(std::isfinite(x), field, "must be finite");
  };
  const auto v = to_vector();
  for (std::size_t i = 0; i < kNumParams; ++i) finite(v[i], kNames[i]);
  require(vf > 0, "vf", "must be > 0");
  require(sj > 0, "sj", "must be > 0");
  require(tau > 0, "tau", "must be > 0");
  require(a > 0, "a", "must be > 0");
  require(b > 0, "b", "must be > 0");
  require(lcStrategic >= 0, "lcStrategic", "must be >= 0");
  require(lcCooperative >= 0 && lcCooperative <= 1, "lcCooperative", "must be in [0,1]");
  require(lcAssertive >= 0, "lcAssertive", "must be >= 0");
  require(lcSpeedGain >= 0, "lcSpeedGain", "must be >= 0");
  require(lcKeepRight >= 0, "lcKeepRight", "must be >= 0");
}

ParameterBounds ParameterBounds::synthetic_ranges() {
  ParameterBounds b;
  b.lower = {30.0, 1.0, 0.5, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  b.upper = {35.0, 3.0, 2.0, 4.0, 3.0, 5.0, 1.0, 5.0, 5.0, 5.0};
  b.free.fill(true);
  return b;
}

ParameterBounds ParameterBounds::with_subset(ParamSubset subset) const {
  ParameterBounds out = *this;
  for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i) {
    const bool is_cf = i < ParameterSet::kNumCf;
    switch (subset) {
      case ParamSubset::CarFollowing: out.free[i] = free[i] && is_cf; break;
      case ParamSubset::LaneChange: out.free[i] = free[i] && !is_cf; break;
      case ParamSubset::Both: break;
    }
  }
  return out;
}

std::size_t ParameterBounds::num_free() const {
  std::size_t n = 0;
  for (bool f : free) n += f ? 1 : 0;
  return n;
}

std::vector<std::size_t> ParameterBounds::free_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i)
    if (free[i]) idx.push_back(i);
  return idx;
}

ParameterSet ParameterBounds::embed(const std::vector<double>& free_values,
                                    const ParameterSet& fixed) const {
  const auto idx = free_indices();
  if (free_values.size() != idx.size())
    throw std::invalid_argument("ParameterBounds::embed: dimension mismatch");
  auto v = fixed.to_vector();
  for (std::size_t k = 0; k < idx.size(); ++k) v[idx[k]] = free_values[k];
  return ParameterSet::from_vector(v);
}

std::vector<double> ParameterBounds::extract(const ParameterSet& p) const {
  const auto v = p.to_vector();
  std::vector<double> out;
  for (std::size_t i : free_indices()) out.push_back(v[i]);
  return out;
}

void ParameterBounds::validate() const {
  for (std::size_t i = 0; i < ParameterSet::kNumParams; ++i) {
    if (free[i] && !(lower[i] < upper[i]))
      throw std::invalid_argument(std::string("ParameterBounds.") +
                                  ParameterSet::name(i) + ": lower must be < upper");
  }
}

}  // namespace mcal
