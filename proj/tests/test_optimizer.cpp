#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mcal/optimizer.hpp"

using namespace mcal;

namespace {
double sphere(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rosenbrock(const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  return s;
}

Bounds box(std::size_t d, double lo, double hi) {
  return Bounds{std::vector<double>(d, lo), std::vector<double>(d, hi)};
}
}  // namespace

TEST_CASE("5-d sphere is solved to 1e-6") {
  DEConfig cfg;
  cfg.population = 20;
  cfg.max_generations = 200;
  cfg.tolerance = 0.0;  // run the full budget
  cfg.seed = 11;
  const OptResult r = differential_evolution(sphere, box(5, -5.0, 5.0), cfg);
  CHECK(r.best_objective < 1e-6);
  for (double v : r.best) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("2-d rosenbrock is solved to 1e-3") {
  DEConfig cfg;
  cfg.population = 20;
  cfg.max_generations = 300;
  cfg.tolerance = 0.0;
  cfg.seed = 5;
  const OptResult r = differential_evolution(rosenbrock, box(2, -2.0, 2.0), cfg);
  CHECK(r.best_objective < 1e-3);
  CHECK(r.best[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(r.best[1] == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("the trace of generation bests never increases") {
  DEConfig cfg;
  cfg.population = 15;
  cfg.max_generations = 80;
  cfg.tolerance = 0.0;
  cfg.seed = 3;
  const OptResult r = differential_evolution(sphere, box(4, -3.0, 3.0), cfg);
  REQUIRE(r.trace.size() == static_cast<std::size_t>(cfg.max_generations) + 1);
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.best_objective == doctest::Approx(r.trace.back()));
}

TEST_CASE("results are identical for any evaluation width") {
  DEConfig cfg;
  cfg.population = 12;
  cfg.max_generations = 40;
  cfg.tolerance = 0.0;
  cfg.seed = 9;
  const OptResult r1 = differential_evolution(rosenbrock, box(3, -2.0, 2.0), cfg);
  cfg.eval_width = 4;
  const OptResult r4 = differential_evolution(rosenbrock, box(3, -2.0, 2.0), cfg);
  cfg.eval_width = 13;  // more workers than population
  const OptResult r13 = differential_evolution(rosenbrock, box(3, -2.0, 2.0), cfg);
  CHECK(r1.best == r4.best);
  CHECK(r1.best == r13.best);
  CHECK(r1.best_objective == r4.best_objective);
  CHECK(r1.trace == r4.trace);
  CHECK(r1.trace == r13.trace);
  CHECK(r1.evaluations == r4.evaluations);
}

TEST_CASE("evaluation count is population times generations plus one") {
  DEConfig cfg;
  cfg.population = 10;
  cfg.max_generations = 25;
  cfg.tolerance = 0.0;
  cfg.seed = 2;
  const OptResult r = differential_evolution(sphere, box(3, -1.0, 1.0), cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.generations == 25);
  CHECK(r.evaluations == 10 * 26);
}

TEST_CASE("every candidate passed to the objective stays inside the bounds") {
  DEConfig cfg;
  cfg.population = 15;
  cfg.max_generations = 30;
  cfg.tolerance = 0.0;
  cfg.seed = 17;
  const Bounds b = box(4, -0.5, 2.5);
  auto checked = [&](const std::vector<double>& x) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      CHECK(x[j] >= b.lower[j]);
      CHECK(x[j] <= b.upper[j]);
    }
    return sphere(x);
  };
  differential_evolution(checked, b, cfg);
}

TEST_CASE("seeded individuals join the initial population") {
  DEConfig cfg;
  cfg.population = 8;
  cfg.max_generations = 1;
  cfg.tolerance = 0.0;
  cfg.seed = 1;
  bool saw_seed = false;
  const std::vector<double> s{0.25, -0.75};
  auto f = [&](const std::vector<double>& x) {
    if (x == s) saw_seed = true;
    return sphere(x);
  };
  differential_evolution(f, box(2, -1.0, 1.0), cfg, {s});
  CHECK(saw_seed);

  // out-of-box seeds are clipped in
  bool in_bounds = true;
  auto g = [&](const std::vector<double>& x) {
    for (double v : x) in_bounds = in_bounds && v >= -1.0 && v <= 1.0;
    return sphere(x);
  };
  differential_evolution(g, box(2, -1.0, 1.0), cfg, {{5.0, -5.0}});
  CHECK(in_bounds);
}

TEST_CASE("convergence on the spread criterion stops early") {
  DEConfig cfg;
  cfg.population = 15;
  cfg.max_generations = 500;
  cfg.tolerance = 0.01;
  cfg.seed = 4;
  // Offset sphere keeps the mean away from zero so the relative
  // criterion is meaningful.
  auto f = [](const std::vector<double>& x) { return 10.0 + sphere(x); };
  const OptResult r = differential_evolution(f, box(3, -2.0, 2.0), cfg);
  CHECK(r.converged);
  CHECK(r.generations < 500);
}

TEST_CASE("degenerate configurations are rejected") {
  DEConfig cfg;
  cfg.population = 3;
  CHECK_THROWS_AS(differential_evolution(sphere, box(2, -1.0, 1.0), cfg),
                  std::invalid_argument);
  cfg = DEConfig{};
  cfg.crossover = 1.5;
  CHECK_THROWS_AS(differential_evolution(sphere, box(2, -1.0, 1.0), cfg),
                  std::invalid_argument);
  cfg = DEConfig{};
  Bounds bad{{0.0, 1.0}, {1.0, 1.0}};  // empty interval on dim 1
  CHECK_THROWS_AS(differential_evolution(sphere, bad, cfg), std::invalid_argument);
  CHECK_THROWS_AS(differential_evolution(sphere, Bounds{{}, {}}, cfg),
                  std::invalid_argument);
  Bounds mismatch{{0.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(differential_evolution(sphere, mismatch, cfg),
                  std::invalid_argument);
}

TEST_CASE("the ledger callback sees every evaluation") {
  DEConfig cfg;
  cfg.population = 6;
  cfg.max_generations = 4;
  cfg.tolerance = 0.0;
  cfg.seed = 8;
  std::size_t calls = 0;
  double best_seen = 1e300;
  const OptResult r = differential_evolution(
      sphere, box(2, -1.0, 1.0), cfg, {},
      [&](std::size_t, std::size_t, double obj, const std::vector<double>&) {
        ++calls;
        best_seen = std::min(best_seen, obj);
      });
  CHECK(calls == r.evaluations);
  CHECK(r.best_objective == doctest::Approx(best_seen));
}
