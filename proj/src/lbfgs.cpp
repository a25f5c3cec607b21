#include "cinf/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace cinf::optim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

// Two-loop recursion: direction = -H g.
std::vector<double> direction(const std::deque<Pair>& memory, std::span<const double> grad) {
    std::vector<double> q(grad.begin(), grad.end());
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
        alpha[k] = memory[k].rho * dot(memory[k].s, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * memory[k].y[i];
    }
    if (!memory.empty()) {
        const auto& last = memory.back();
        const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (auto& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
        const double beta = memory[k].rho * dot(memory[k].y, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += memory[k].s[i] * (alpha[k] - beta);
    }
    for (auto& v : q) v = -v;
    return q;
}

}  // namespace

LbfgsResult minimize(const Objective& objective, std::vector<double> x0, const LbfgsOptions& options) {
    const std::size_t n = x0.size();
    LbfgsResult result;
    result.x = std::move(x0);
    std::vector<double> grad(n);
    result.value = objective(result.x, grad);
    result.trace.push_back(result.value);
    result.gradient_norm = std::sqrt(dot(grad, grad));
    if (!std::isfinite(result.value)) return result;
    if (result.gradient_norm <= options.gradient_tolerance) {
        result.converged = true;
        return result;
    }

    std::deque<Pair> memory;
    std::vector<double> x_new(n), grad_new(n);
    bool reset_once = false;
    while (result.iterations < options.max_iterations) {
        auto d = direction(memory, grad);
        double slope = dot(grad, d);
        if (!(slope < 0.0)) {
            memory.clear();
            d.assign(grad.begin(), grad.end());
            for (auto& v : d) v = -v;
            slope = -result.gradient_norm * result.gradient_norm;
        }
        double step = memory.empty() ? std::min(1.0, 1.0 / result.gradient_norm) : 1.0;
        double value_new = 0.0;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = result.x[i] + step * d[i];
            value_new = objective(x_new, grad_new);
            if (std::isfinite(value_new) && value_new <= result.value + options.armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (memory.empty() || reset_once) break;
            memory.clear();
            reset_once = true;
            continue;
        }
        reset_once = false;
        ++result.iterations;

        Pair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            pair.s[i] = x_new[i] - result.x[i];
            pair.y[i] = grad_new[i] - grad[i];
        }
        const double sy = dot(pair.s, pair.y);
        if (sy > 1e-12 * std::sqrt(dot(pair.s, pair.s) * dot(pair.y, pair.y))) {
            pair.rho = 1.0 / sy;
            memory.push_back(std::move(pair));
            if (memory.size() > static_cast<std::size_t>(options.history)) memory.pop_front();
        }

        const double previous = result.value;
        result.x.swap(x_new);
        grad.swap(grad_new);
        result.value = value_new;
        result.trace.push_back(value_new);
        result.gradient_norm = std::sqrt(dot(grad, grad));
        if (result.gradient_norm <= options.gradient_tolerance) {
            result.converged = true;
            break;
        }
        if (std::abs(previous - value_new) <= options.relative_tolerance * std::max(1.0, std::abs(previous))) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace cinf::optim
