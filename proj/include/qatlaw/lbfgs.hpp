#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qatlaw/errors.hpp"

namespace qatlaw::fit {

// Objective callback: returns f(x) and fills grad (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct OptimConfig {
  int memory = 10;          // L-BFGS history length
  double grad_tol = 1e-9;   // stop when ||grad||_2 <= grad_tol
  int max_iters = 2000;
  // Initial points for multistart drivers; ignored by lbfgs_minimize itself.
  std::vector<std::vector<double>> multistart_grid;

  void validate() const {
    if (memory < 1) throw ConfigError("lbfgs memory must be >= 1");
    if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be > 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  }
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;          // gradient tolerance reached
  bool line_search_failed = false; // reported; best iterate still returned
  int iterations = 0;
};

// Limited-memory BFGS with two-loop recursion and a strong-Wolfe line search
// (sufficient decrease + curvature). Throws NonFiniteObjective if the
// objective is not finite at x0; a failing line search is reported through
// the result, with the best iterate seen so far.
MinimizeResult lbfgs_minimize(const Objective& objective, std::span<const double> x0,
                              const OptimConfig& cfg);

}  // namespace qatlaw::fit
