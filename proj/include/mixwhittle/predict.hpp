#ifndef MIXWHITTLE_PREDICT_HPP
#define MIXWHITTLE_PREDICT_HPP

// Simple Kriging with the fitted fixed term treated as a known mean.
// Time indices in this header are 1-based, matching the design convention.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mixwhittle/aep.hpp"
#include "mixwhittle/covariance.hpp"
#include "mixwhittle/design.hpp"
#include "mixwhittle/estimate.hpp"
#include "mixwhittle/linalg.hpp"
#include "mixwhittle/parallel.hpp"
#include "mixwhittle/spectral.hpp"

namespace mixwhittle {

struct Prediction {
    std::vector<std::size_t> times;
    std::vector<double> mean;
    std::vector<double> variance;  // Gaussian-space variance for the AEP pipeline
    // quantiles[q][i] at level quantile_levels[q]; filled by krige_aep
    std::vector<double> quantile_levels;
    std::vector<std::vector<double>> quantiles;
    int jitter_escalations = 0;
    std::size_t clamped = 0;
};

/// Residual Kriging given an autocovariance sequence long enough for every
/// lag involved. `obs` and `targets` are 0-based positions.
struct ResidualKriging {
    std::vector<double> mean;
    std::vector<double> variance;
    int jitter_escalations = 0;
};

inline ResidualKriging krige_residuals(std::span<const double> acv_seq, std::span<const std::size_t> obs,
                                       const Eigen::VectorXd& residuals, std::span<const std::size_t> targets) {
    if (static_cast<std::size_t>(residuals.size()) != obs.size()) throw LengthError("one residual per observed time is required");
    if (obs.empty()) throw LengthError("Kriging needs at least one observation");
    const double c0 = acv_seq[0];
    const auto chol = factorize(covariance_matrix(acv_seq, obs), 1e-10 * c0, 3);
    const auto k = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd cross(k, static_cast<Eigen::Index>(targets.size()));
    for (std::size_t j = 0; j < targets.size(); ++j)
        for (Eigen::Index i = 0; i < k; ++i) {
            const std::size_t a = obs[static_cast<std::size_t>(i)], b = targets[j];
            const std::size_t lag = a > b ? a - b : b - a;
            if (lag >= acv_seq.size()) throw LengthError("autocovariance sequence shorter than the largest lag");
            cross(i, static_cast<Eigen::Index>(j)) = acv_seq[lag];
        }
    const Eigen::VectorXd weights_r = chol.llt.solve(residuals);
    const Eigen::MatrixXd whitened = chol.llt.matrixL().solve(cross);
    ResidualKriging out;
    out.jitter_escalations = chol.escalations;
    out.mean.resize(targets.size());
    out.variance.resize(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out.mean[j] = cross.col(jj).dot(weights_r);
        out.variance[j] = std::max(0.0, c0 - whitened.col(jj).squaredNorm());
    }
    return out;
}

namespace detail {

struct KrigingSetup {
    Eigen::VectorXd fixed;              // fixed term over rows 1..rows
    std::vector<std::size_t> observed;  // 0-based
    std::vector<std::size_t> targets;   // 0-based
    std::vector<double> acv;            // lags 0..rows-1
};

inline KrigingSetup kriging_setup(const ObservedSeries& series, const ModelFit& fit, const DesignSpec& spec,
                                  const std::optional<ExogenousSeries>& exog, std::span<const std::size_t> targets,
                                  const CovarianceSpec& cov) {
    if (series.mask.size() != series.size()) throw LengthError("mask length differs from value length");
    if (targets.empty()) throw LengthError("no target times");
    const std::size_t n = series.size();
    std::size_t rows = n;
    KrigingSetup s;
    for (auto t : targets) {
        if (t < 1) throw DomainError("target times start at 1");
        rows = std::max(rows, t);
        s.targets.push_back(t - 1);
    }
    const Design design(spec, exog, n, rows);
    if (static_cast<std::size_t>(fit.beta.size()) != design.columns())
        throw LengthError("fit coefficients do not match the design");
    s.fixed = design.matrix(fit.gamma) * fit.beta;
    s.observed = series.observed_indices();
    s.acv = acv_sequence(cov, rows);
    return s;
}

}  // namespace detail

/// Simple Kriging at 1-based target times (gaps inside 1..n or forecasts
/// beyond n). Forecasts need exogenous data through the last target.
inline Prediction simple_krige(const ObservedSeries& series, const ModelFit& fit, const DesignSpec& spec,
                               const std::optional<ExogenousSeries>& exog, std::span<const std::size_t> targets) {
    const auto s = detail::kriging_setup(series, fit, spec, exog, targets, fit.alpha);
    Eigen::VectorXd r(static_cast<Eigen::Index>(s.observed.size()));
    for (std::size_t i = 0; i < s.observed.size(); ++i)
        r(static_cast<Eigen::Index>(i)) = series.values[s.observed[i]] - s.fixed(static_cast<Eigen::Index>(s.observed[i]));
    const auto k = krige_residuals(s.acv, s.observed, r, s.targets);
    Prediction out;
    out.times.assign(targets.begin(), targets.end());
    out.variance = k.variance;
    out.jitter_escalations = k.jitter_escalations;
    out.mean.resize(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) out.mean[j] = s.fixed(static_cast<Eigen::Index>(s.targets[j])) + k.mean[j];
    return out;
}

/// Kriging for Gaussian-copula AEP errors: residuals are mapped to normal
/// scores, kriged with the latent covariance, and the predicted value is
/// mapped back through F^-1(Phi(.)) before the fixed term is added.
/// Predictive quantiles at `levels` map the latent Gaussian quantiles the
/// same way.
inline Prediction krige_aep(const ObservedSeries& series, const ModelFit& fit, const DesignSpec& spec,
                            const std::optional<ExogenousSeries>& exog, std::span<const std::size_t> targets,
                            std::vector<double> levels = {}) {
    if (!fit.theta) throw SpecError("AEP Kriging needs a fit with AEP parameters");
    const AepDistribution dist(*fit.theta);
    const auto s = detail::kriging_setup(series, fit, spec, exog, targets, fit.alpha);
    Prediction out;
    Eigen::VectorXd a(static_cast<Eigen::Index>(s.observed.size()));
    for (std::size_t i = 0; i < s.observed.size(); ++i) {
        bool clamped = false;
        const double r = series.values[s.observed[i]] - s.fixed(static_cast<Eigen::Index>(s.observed[i]));
        a(static_cast<Eigen::Index>(i)) = dist.normal_score(r, kAepClamp, clamped);
        out.clamped += clamped ? 1 : 0;
    }
    const auto k = krige_residuals(s.acv, s.observed, a, s.targets);
    out.times.assign(targets.begin(), targets.end());
    out.variance = k.variance;
    out.jitter_escalations = k.jitter_escalations;
    out.mean.resize(targets.size());
    out.quantile_levels = levels;
    out.quantiles.assign(levels.size(), std::vector<double>(targets.size()));
    for (std::size_t j = 0; j < targets.size(); ++j) {
        const double fixed = s.fixed(static_cast<Eigen::Index>(s.targets[j]));
        out.mean[j] = fixed + dist.from_normal(k.mean[j]);
        for (std::size_t q = 0; q < levels.size(); ++q) {
            const double z = k.mean[j] + std::sqrt(k.variance[j]) * normal_quantile(levels[q]);
            out.quantiles[q][j] = fixed + dist.from_normal(z);
        }
    }
    return out;
}

/// Dispatches on whether the fit carries AEP parameters.
inline Prediction predict(const ObservedSeries& series, const ModelFit& fit, const DesignSpec& spec,
                          const std::optional<ExogenousSeries>& exog, std::span<const std::size_t> targets) {
    return fit.theta ? krige_aep(series, fit, spec, exog, targets) : simple_krige(series, fit, spec, exog, targets);
}

// ---------------------------------------------------------------------------
// Gap experiment

struct GapPlan {
    std::size_t count = 12;
    std::size_t length = 1;
};

inline std::vector<GapPlan> default_gap_plans() { return {{12, 1}, {6, 2}, {3, 4}}; }

/// Draws `plan.count` disjoint runs of `plan.length` observed times, each
/// with observed neighbours on both sides and no neighbour shared between
/// runs. Returns 0-based positions.
inline std::vector<std::size_t> place_gaps(std::span<const std::uint8_t> mask, const GapPlan& plan, std::mt19937_64& rng,
                                           std::size_t max_attempts = 10000) {
    const std::size_t n = mask.size();
    if (plan.count == 0 || plan.length == 0) throw DomainError("gap plan needs positive count and length");
    if (n < plan.length + 2) throw DomainError("series too short for the gap plan");
    // A gap may start at s when s-1 .. s+length are all observed.
    std::vector<std::size_t> starts;
    for (std::size_t s = 1; s + plan.length < n; ++s) {
        bool ok = true;
        for (std::size_t t = s - 1; t <= s + plan.length && ok; ++t) ok = mask[t] != 0;
        if (ok) starts.push_back(s);
    }
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<std::uint8_t> used(n, 0);
        std::vector<std::size_t> out;
        auto pool = starts;
        std::shuffle(pool.begin(), pool.end(), rng);
        for (auto s : pool) {
            bool clear = true;
            for (std::size_t t = s - 1; t <= s + plan.length && clear; ++t) clear = used[t] == 0;
            if (!clear) continue;
            for (std::size_t t = s - 1; t <= s + plan.length; ++t) used[t] = 1;
            for (std::size_t t = s; t < s + plan.length; ++t) out.push_back(t);
            if (out.size() == plan.count * plan.length) {
                std::sort(out.begin(), out.end());
                return out;
            }
        }
    }
    throw DomainError("cannot place " + std::to_string(plan.count) + " gaps of length " + std::to_string(plan.length) +
                      " with observed neighbours");
}

struct GapPlanResult {
    GapPlan plan;
    std::vector<double> rmse_a, rmse_b;  // per repeat
    double overall_rmse_a = 0.0, overall_rmse_b = 0.0;
    double reduction_percent = 0.0;  // 100 (RMSE_B - RMSE_A) / RMSE_B, pooled
    double median_repeat_reduction = 0.0;
};

struct GapExperimentResult {
    std::vector<GapPlanResult> plans;
    double median_reduction = 0.0;  // over all repeats of all plans
};

namespace detail {
inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double reduction(double rmse_a, double rmse_b) { return rmse_b > 0.0 ? 100.0 * (rmse_b - rmse_a) / rmse_b : 0.0; }
}  // namespace detail

/// Removes observed values at random gap positions, predicts them with two
/// fits (no refitting) and compares RMSE. Reductions are of A relative to B.
inline GapExperimentResult gap_experiment(const ObservedSeries& series, const DesignSpec& spec,
                                          const std::optional<ExogenousSeries>& exog, const ModelFit& fit_a,
                                          const ModelFit& fit_b, const std::vector<GapPlan>& plans,
                                          std::size_t repeats, std::uint64_t seed, std::size_t threads = 1) {
    if (repeats == 0) throw DomainError("gap experiment needs at least one repeat");
    GapExperimentResult out;
    std::vector<double> all;
    for (std::size_t p = 0; p < plans.size(); ++p) {
        GapPlanResult pr;
        pr.plan = plans[p];
        struct Repeat {
            double sse_a = 0.0, sse_b = 0.0;
            std::size_t count = 0;
        };
        std::vector<Repeat> reps(repeats);
        parallel_for(repeats, threads, [&](std::size_t r) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(r)};
            std::mt19937_64 rng(seq);
            const auto gaps = place_gaps(series.mask, plans[p], rng);
            ObservedSeries reduced = series;
            std::vector<std::size_t> targets;
            for (auto t : gaps) {
                reduced.mask[t] = 0;
                targets.push_back(t + 1);
            }
            const auto pa = predict(reduced, fit_a, spec, exog, targets);
            const auto pb = predict(reduced, fit_b, spec, exog, targets);
            for (std::size_t j = 0; j < gaps.size(); ++j) {
                const double truth = series.values[gaps[j]];
                reps[r].sse_a += (pa.mean[j] - truth) * (pa.mean[j] - truth);
                reps[r].sse_b += (pb.mean[j] - truth) * (pb.mean[j] - truth);
            }
            reps[r].count = gaps.size();
        });
        double sse_a = 0.0, sse_b = 0.0;
        std::size_t count = 0;
        std::vector<double> reductions;
        for (const auto& rep : reps) {
            sse_a += rep.sse_a;
            sse_b += rep.sse_b;
            count += rep.count;
            pr.rmse_a.push_back(std::sqrt(rep.sse_a / double(rep.count)));
            pr.rmse_b.push_back(std::sqrt(rep.sse_b / double(rep.count)));
            reductions.push_back(detail::reduction(pr.rmse_a.back(), pr.rmse_b.back()));
        }
        pr.overall_rmse_a = std::sqrt(sse_a / double(count));
        pr.overall_rmse_b = std::sqrt(sse_b / double(count));
        pr.reduction_percent = detail::reduction(pr.overall_rmse_a, pr.overall_rmse_b);
        pr.median_repeat_reduction = detail::median_of(reductions);
        all.insert(all.end(), reductions.begin(), reductions.end());
        out.plans.push_back(std::move(pr));
    }
    out.median_reduction = detail::median_of(all);
    return out;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_PREDICT_HPP
