#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cinf::optim {

// Objective to minimize: returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
    int max_iterations = 1000;
    int history = 10;
    double gradient_tolerance = 1e-6;  // Euclidean norm
    double relative_tolerance = 1e-8;  // |f_k - f_{k+1}| / max(1, |f_k|)
    double armijo = 1e-4;
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // objective after every accepted step, starting at x0
};

// Limited-memory BFGS with a backtracking Armijo line search, so the
// objective never increases between iterations.
LbfgsResult minimize(const Objective& objective, std::vector<double> x0,
                     const LbfgsOptions& options = {});

}  // namespace cinf::optim
