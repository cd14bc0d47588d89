#pragma once

#include <functional>
#include <vector>

namespace dsatlas {

struct LbfgsOptions {
    int memory = 5;
    int max_iterations = 200;
    double convergence_tol = 1e-6;  // relative cost change between accepted iterates
    double max_step = 2.0;          // cap on the step norm per iteration
};

struct LbfgsResult {
    std::vector<double> x;
    double cost = 0;
    double initial_cost = 0;
    int iterations = 0;
    bool improved = false;  // cost strictly below the initial cost
};

/// Bounded-step L-BFGS with a monotone backtracking (Armijo) line search:
/// the accepted cost never increases between iterations. `cost` and
/// `gradient` are called with the current scaled parameter vector.
LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&)>& cost,
    const std::function<std::vector<double>(const std::vector<double>&)>& gradient,
    std::vector<double> x0, const LbfgsOptions& opts);

}  // namespace dsatlas
