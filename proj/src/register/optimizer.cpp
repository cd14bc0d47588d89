#include "dsatlas/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace dsatlas {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

LbfgsResult lbfgs_minimize(
    const std::function<double(const std::vector<double>&)>& cost,
    const std::function<std::vector<double>(const std::vector<double>&)>& gradient,
    std::vector<double> x0, const LbfgsOptions& opts) {
    const std::size_t n = x0.size();
    LbfgsResult res;
    res.x = std::move(x0);
    res.cost = cost(res.x);
    res.initial_cost = res.cost;
    const double f0 = res.cost;

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> g = gradient(res.x);
    int small_drops = 0;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const double gnorm = norm2(g);
        if (gnorm < 1e-14) break;

        // two-loop recursion
        std::vector<double> d = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = int(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], d);
            for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[i] * y_hist[i][k];
        }
        if (!s_hist.empty()) {
            const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            for (auto& v : d) v *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], d);
            for (std::size_t k = 0; k < n; ++k) d[k] += s_hist[i][k] * (alpha[i] - beta);
        }
        for (auto& v : d) v = -v;

        double dir_deriv = dot(g, d);
        if (dir_deriv >= 0) {  // not a descent direction; fall back to steepest descent
            for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
            dir_deriv = -gnorm * gnorm;
        }

        const double dnorm = norm2(d);
        if (dnorm == 0) break;
        // without curvature history the raw gradient has no useful length;
        // take a full bounded step along it
        double step = s_hist.empty() ? opts.max_step / dnorm
                                     : std::min(1.0, opts.max_step / dnorm);

        // Armijo backtracking: accepted cost never increases
        const double c1 = 1e-4;
        bool accepted = false;
        std::vector<double> x_new(n);
        double f_new = res.cost;
        while (step * dnorm > 1e-12) {
            for (std::size_t k = 0; k < n; ++k) x_new[k] = res.x[k] + step * d[k];
            f_new = cost(x_new);
            if (f_new <= res.cost + c1 * step * dir_deriv) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> g_new = gradient(x_new);
        std::vector<double> s(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = x_new[k] - res.x[k];
            y[k] = g_new[k] - g[k];
        }
        const double sy = dot(s, y);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (int(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        const double drop = res.cost - f_new;
        res.x = std::move(x_new);
        res.cost = f_new;
        g = std::move(g_new);
        res.iterations = iter + 1;

        // two consecutive negligible drops end the level, one alone may just
        // be a weak line search
        if (drop <= opts.convergence_tol * std::max(1.0, std::abs(res.cost))) {
            if (++small_drops >= 2) break;
        } else {
            small_drops = 0;
        }
    }
    res.improved = res.cost < f0;
    return res;
}

}  // namespace dsatlas
