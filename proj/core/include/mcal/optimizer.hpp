#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mcal {

using Objective = std::function<double(const std::vector<double>&)>;

struct DEConfig {
  std::size_t population = 15;
  double weight = 0.8;       // differential weight F
  double crossover = 0.9;    // crossover rate CR
  std::size_t max_generations = 100;
  double tolerance = 0.01;   // relative std of population objectives
  std::uint64_t seed = 0;
  std::size_t eval_width = 1;  // concurrent objective evaluations

  void validate() const;
};

struct OptResult {
  std::vector<double> best;
  double best_objective = 0.0;
  std::size_t generations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  // best objective after init and each generation
};

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Evaluates objectives in input order; results are independent of width.
std::vector<double> evaluate_population(
    const Objective& f, const std::vector<std::vector<double>>& vectors,
    std::size_t width);

/// DE/rand/1/bin with bound clipping and greedy selection (ties go to the
/// trial). Deterministic given the seed, regardless of eval_width.
/// `seeds` overwrites the first entries of the random initial population.
OptResult differential_evolution(
    const Objective& f, const Bounds& bounds, const DEConfig& cfg,
    const std::vector<std::vector<double>>& seeds = {},
    const std::function<void(std::size_t gen, std::size_t eval_index,
                             double objective, const std::vector<double>& x)>&
        ledger = nullptr);

}  // namespace mcal
