#ifndef MIXWHITTLE_OPTIMIZE_HPP
#define MIXWHITTLE_OPTIMIZE_HPP

// Nelder-Mead simplex search with jittered restarts.
//
// Uses the dimension-adaptive coefficients (reflection 1, expansion 1 + 2/d,
// contraction 0.75 - 1/(2d), shrink 1 - 1/d), which behave much better than
// the classical ones beyond a handful of dimensions. Objectives may return
// +inf to reject a point.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mixwhittle/error.hpp"

namespace mixwhittle {

struct OptimConfig {
    std::size_t max_iterations = 5000;
    double tolerance = 1e-8;     // objective spread across the simplex
    std::size_t restarts = 3;    // total runs, including the first
    double initial_step = 0.25;  // simplex edge, relative to max(|x_i|, 1)
    double jitter = 0.2;         // restart perturbation, same scaling
    std::uint64_t seed = 0;
};

struct OptimReport {
    std::size_t iterations = 0;   // summed over restarts
    std::size_t evaluations = 0;  // summed over restarts
    std::size_t rejected = 0;     // evaluations returning +inf or NaN
    std::size_t restarts_used = 0;
    std::size_t best_restart = 0;
    bool converged = false;
    std::vector<double> restart_values;
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    OptimReport report;
};

namespace detail {

struct SimplexRun {
    Eigen::VectorXd x;
    double value;
    std::size_t iterations;
    bool converged;
};

template <class F>
SimplexRun nelder_mead(F& f, const Eigen::VectorXd& start, const OptimConfig& cfg, OptimReport& report) {
    const auto d = start.size();
    const double dd = static_cast<double>(d);
    const double r_coef = 1.0, e_coef = 1.0 + 2.0 / dd, c_coef = 0.75 - 0.5 / dd, s_coef = 1.0 - 1.0 / dd;

    auto eval = [&](const Eigen::VectorXd& p) {
        ++report.evaluations;
        double v = f(p);
        if (!std::isfinite(v)) {
            ++report.rejected;
            v = std::numeric_limits<double>::infinity();
        }
        return v;
    };

    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), start);
    std::vector<double> vals(pts.size());
    vals[0] = eval(start);
    for (Eigen::Index i = 0; i < d; ++i) {
        auto& p = pts[static_cast<std::size_t>(i + 1)];
        p(i) += cfg.initial_step * std::max(std::abs(start(i)), 1.0);
        vals[static_cast<std::size_t>(i + 1)] = eval(p);
    }

    std::vector<std::size_t> order(pts.size());
    std::size_t it = 0;
    bool converged = false;
    for (; it < cfg.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
        if (std::isfinite(vals[worst]) && vals[worst] - vals[best] < cfg.tolerance) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += pts[order[k]];
        centroid /= dd;

        const Eigen::VectorXd xr = centroid + r_coef * (centroid - pts[worst]);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            const Eigen::VectorXd xe = centroid + e_coef * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + c_coef * (xr - centroid))
                                           : Eigen::VectorXd(centroid - c_coef * (centroid - pts[worst]));
        const double fc = eval(xc);
        if (outside ? fc <= fr : fc < vals[worst]) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t k = 1; k < order.size(); ++k) {
            auto& p = pts[order[k]];
            p = pts[best] + s_coef * (p - pts[best]);
            vals[order[k]] = eval(p);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return {pts[best], vals[best], it, converged};
}

}  // namespace detail

/// Minimizes f from x0. Restart 0 starts at x0; each later restart starts
/// from a jittered copy of the best point so far. The lowest value wins, ties
/// (within 1e-12) going to the earlier restart.
template <class F>
OptimResult minimize(F&& f, const Eigen::VectorXd& x0, const OptimConfig& cfg = {}) {
    if (x0.size() == 0) throw DomainError("minimize: no free parameters");
    if (cfg.restarts == 0) throw DomainError("minimize: at least one run is required");
    OptimResult out;
    out.x = x0;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    bool best_converged = false;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        Eigen::VectorXd start = r == 0 ? x0 : out.x;
        if (r > 0)
            for (Eigen::Index i = 0; i < start.size(); ++i)
                start(i) += cfg.jitter * std::max(std::abs(start(i)), 1.0) * normal(rng);
        auto run = detail::nelder_mead(f, start, cfg, out.report);
        out.report.iterations += run.iterations;
        out.report.restart_values.push_back(run.value);
        ++out.report.restarts_used;
        if (r == 0 || run.value < out.value - 1e-12) {
            out.x = run.x;
            out.value = run.value;
            out.report.best_restart = r;
            best_converged = run.converged;
        }
    }
    if (!std::isfinite(out.value)) throw NumericalError("optimizer found no point with a finite objective");
    out.report.converged = best_converged;
    return out;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_OPTIMIZE_HPP
