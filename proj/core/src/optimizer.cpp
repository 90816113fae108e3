#include "mcal/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace mcal {

void DEConfig::validate() const {
  if (population < 4) throw std::invalid_argument("DEConfig: population must be >= 4");
  if (max_generations < 1)
    throw std::invalid_argument("DEConfig: max_generations must be >= 1");
  if (!(weight > 0) || weight > 2)
    throw std::invalid_argument("DEConfig: weight must be in (0, 2]");
  if (crossover < 0 || crossover > 1)
    throw std::invalid_argument("DEConfig: crossover must be in [0, 1]");
  if (tolerance < 0) throw std::invalid_argument("DEConfig: tolerance must be >= 0");
  if (eval_width < 1) throw std::invalid_argument("DEConfig: eval_width must be >= 1");
}

std::vector<double> evaluate_population(
    const Objective& f, const std::vector<std::vector<double>>& vectors,
    std::size_t width) {
  if (width < 1) throw std::invalid_argument("evaluate_population: width must be >= 1");
  std::vector<double> out(vectors.size());
  if (width == 1 || vectors.size() <= 1) {
    for (std::size_t i = 0; i < vectors.size(); ++i) out[i] = f(vectors[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= vectors.size()) return;
      out[i] = f(vectors[i]);
    }
  };
  std::vector<std::thread> threads;
  const std::size_t n = std::min(width, vectors.size());
  threads.reserve(n);
  for (std::size_t k = 0; k < n; ++k) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return out;
}

OptResult differential_evolution(
    const Objective& f, const Bounds& bounds, const DEConfig& cfg,
    const std::vector<std::vector<double>>& seeds,
    const std::function<void(std::size_t, std::size_t, double,
                             const std::vector<double>&)>& ledger) {
  cfg.validate();
  const std::size_t d = bounds.lower.size();
  if (d < 1 || bounds.upper.size() != d)
    throw std::invalid_argument("differential_evolution: invalid bounds dimension");
  for (std::size_t j = 0; j < d; ++j)
    if (!(bounds.lower[j] < bounds.upper[j]))
      throw std::invalid_argument(
          "differential_evolution: degenerate bounds on dimension " +
          std::to_string(j));

  const std::size_t np = cfg.population;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto clip = [&](double x, std::size_t j) {
    return std::clamp(x, bounds.lower[j], bounds.upper[j]);
  };

  std::vector<std::vector<double>> pop(np, std::vector<double>(d));
  for (auto& x : pop)
    for (std::size_t j = 0; j < d; ++j)
      x[j] = bounds.lower[j] + uni(rng) * (bounds.upper[j] - bounds.lower[j]);
  for (std::size_t i = 0; i < std::min(seeds.size(), np); ++i) {
    if (seeds[i].size() != d)
      throw std::invalid_argument("differential_evolution: seed dimension mismatch");
    pop[i] = seeds[i];
    for (std::size_t j = 0; j < d; ++j) pop[i][j] = clip(pop[i][j], j);
  }

  OptResult res;
  std::vector<double> fitness = evaluate_population(f, pop, cfg.eval_width);
  res.evaluations = np;
  if (ledger)
    for (std::size_t i = 0; i < np; ++i) ledger(0, i, fitness[i], pop[i]);

  auto best_index = [&]() {
    std::size_t bi = 0;
    for (std::size_t i = 1; i < np; ++i)
      if (fitness[i] < fitness[bi]) bi = i;
    return bi;
  };
  res.trace.push_back(fitness[best_index()]);

  auto spread_converged = [&]() {
    double mean = 0.0;
    for (double v : fitness) mean += v;
    mean /= static_cast<double>(np);
    double var = 0.0;
    for (double v : fitness) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(np));
    return sd <= cfg.tolerance * std::abs(mean);
  };

  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<std::size_t> pickdim(0, d - 1);

  for (std::size_t gen = 1; gen <= cfg.max_generations; ++gen) {
    // All random draws happen here, before any evaluation, so the stream is
    // identical no matter how trials are scheduled.
    std::vector<std::vector<double>> trials(np, std::vector<double>(d));
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r1, r2, r3;
      do { r1 = pick(rng); } while (r1 == i);
      do { r2 = pick(rng); } while (r2 == i || r2 == r1);
      do { r3 = pick(rng); } while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t jrand = pickdim(rng);
      for (std::size_t j = 0; j < d; ++j) {
        const double mutant =
            clip(pop[r1][j] + cfg.weight * (pop[r2][j] - pop[r3][j]), j);
        trials[i][j] = (uni(rng) < cfg.crossover || j == jrand) ? mutant : pop[i][j];
      }
    }
    const std::vector<double> trial_fitness =
        evaluate_population(f, trials, cfg.eval_width);
    res.evaluations += np;
    if (ledger)
      for (std::size_t i = 0; i < np; ++i)
        ledger(gen, res.evaluations - np + i, trial_fitness[i], trials[i]);
    for (std::size_t i = 0; i < np; ++i) {
      if (trial_fitness[i] <= fitness[i]) {  // ties go to the trial
        pop[i] = std::move(trials[i]);
        fitness[i] = trial_fitness[i];
      }
    }
    res.generations = gen;
    res.trace.push_back(fitness[best_index()]);
    if (spread_converged()) {
      res.converged = true;
      break;
    }
  }

  const std::size_t bi = best_index();
  res.best = pop[bi];
  res.best_objective = fitness[bi];
  return res;
}

}  // namespace mcal
