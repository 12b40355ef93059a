#ifndef MIXWHITTLE_SIMSTUDY_HPP
#define MIXWHITTLE_SIMSTUDY_HPP

// Simulation study: scenario generation, MCAR masking, estimator runs and
// error metrics.
//
// Seeds are derived by hashing (base seed, stream tag, scenario, n,
// replicate[, method]) so any replicate can be regenerated on its own and
// results do not depend on scheduling.

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mixwhittle/aep.hpp"
#include "mixwhittle/design.hpp"
#include "mixwhittle/estimate.hpp"
#include "mixwhittle/gaussian_process.hpp"
#include "mixwhittle/parallel.hpp"
#include "mixwhittle/predict.hpp"

namespace mixwhittle {

enum class Scenario { StandardMixed, FullyRandom, AepError };

inline std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::StandardMixed: return "standard_mixed";
        case Scenario::FullyRandom: return "fully_random";
        case Scenario::AepError: return "aep_error";
    }
    return "unknown";
}

inline Scenario scenario_from_string(std::string_view s) {
    if (s == "standard_mixed") return Scenario::StandardMixed;
    if (s == "fully_random") return Scenario::FullyRandom;
    if (s == "aep_error") return Scenario::AepError;
    throw SpecError("unknown scenario '" + std::string(s) + "'");
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t seed_hash(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

namespace seed_stream {
inline constexpr std::uint64_t errors = 1, exogenous = 2, mask = 3, method = 4;
}

struct ScenarioTruth {
    DesignSpec design;
    Eigen::VectorXd beta;
    IrfParams gamma{8.0, 0.2};
    CovarianceSpec alpha;
    std::optional<AepParams> theta;
    CovarianceSpec alpha_ext;
    std::size_t irf_window = kDefaultIrfWindow;
};

inline ScenarioTruth default_truth(Scenario s) {
    ScenarioTruth t;
    t.alpha.family = CovarianceFamily::Matern;
    t.alpha.c0 = 0.05;
    t.alpha.c1 = 2.0;
    t.alpha.lambda_m = 25.0;
    t.alpha.nu = 1.5;
    t.alpha_ext.family = CovarianceFamily::Matern;
    t.alpha_ext.c0 = 0.1;
    t.alpha_ext.c1 = 1.0;
    t.alpha_ext.lambda_m = 15.0;
    t.alpha_ext.nu = 0.5;
    if (s == Scenario::AepError) {
        t.design = {{DesignComponent::intercept(), DesignComponent::linear_trend(), DesignComponent::seasonal(12),
                     DesignComponent::irf(t.irf_window)}};
        t.beta.resize(5);
        t.beta << 16.0, 3.0, 0.15, -0.6, 1.5;
        t.alpha.c0 = 0.1;
        t.alpha.c1 = 0.9;
        t.theta = AepParams{0.0, 1.4, 0.4, 1.0, 1.9};
        return t;
    }
    t.design = {{DesignComponent::linear_trend(), DesignComponent::seasonal(12), DesignComponent::splines(4),
                 DesignComponent::irf(t.irf_window)}};
    t.beta.resize(8);
    t.beta << 3.0, 0.15, -0.6, 18.0, 10.0, 18.0, 20.0, 1.5;
    if (s == Scenario::FullyRandom) t.beta.setZero();
    return t;
}

struct ScenarioConfig {
    Scenario scenario = Scenario::StandardMixed;
    std::size_t n = 256;
    double missing_fraction = 0.25;
    std::uint64_t base_seed = 0;
    std::optional<ScenarioTruth> truth;  // defaults when unset

    void validate() const {
        if (n < 16) throw DomainError("scenario length must be at least 16");
        if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) throw DomainError("missing fraction must be in [0, 1)");
    }
    ScenarioTruth resolved_truth() const { return truth ? *truth : default_truth(scenario); }
};

struct ScenarioData {
    ObservedSeries series;        // masked observations
    std::vector<double> complete;  // values at every time, including masked ones
    std::vector<double> errors;
    Eigen::VectorXd fixed;
    ExogenousSeries exog;
    ScenarioTruth truth;
    std::size_t mask_redraws = 0;
};

/// exp of a zero-mean Gaussian draw with covariance alpha_ext.
inline ExogenousSeries gen_external_variable(const CovarianceSpec& alpha_ext, std::size_t length, std::size_t lead,
                                             std::uint64_t seed) {
    auto v = simulate_gaussian_process(alpha_ext, length, seed);
    for (auto& x : v) x = std::exp(x);
    return {std::move(v), lead};
}

/// MCAR mask with each time missing independently with probability
/// `fraction`; redrawn until at least `min_observed` values remain.
inline std::vector<std::uint8_t> mcar_mask(std::size_t n, double fraction, std::size_t min_observed, std::mt19937_64& rng,
                                           std::size_t& redraws) {
    if (min_observed > n) throw DomainError("cannot keep more observations than the series length");
    std::bernoulli_distribution missing(fraction);
    redraws = 0;
    for (;;) {
        std::vector<std::uint8_t> g(n);
        std::size_t kept = 0;
        for (auto& v : g) {
            v = missing(rng) ? 0 : 1;
            kept += v;
        }
        if (kept >= min_observed) return g;
        ++redraws;
    }
}

inline ScenarioData gen_scenario(const ScenarioConfig& cfg, std::size_t replicate) {
    cfg.validate();
    ScenarioData d;
    d.truth = cfg.resolved_truth();
    const auto sc = static_cast<std::uint64_t>(cfg.scenario);
    const std::size_t n = cfg.n, window = d.truth.irf_window;
    d.exog = gen_external_variable(d.truth.alpha_ext, n + window - 1, window - 1,
                                   seed_hash({cfg.base_seed, seed_stream::exogenous, n, replicate}));
    const std::uint64_t err_seed = seed_hash({cfg.base_seed, seed_stream::errors, sc, n, replicate});
    if (cfg.scenario == Scenario::AepError)
        d.errors = simulate_aep_errors(d.truth.alpha, *d.truth.theta, n, err_seed);
    else
        d.errors = simulate_gaussian_process(d.truth.alpha, n, err_seed);
    const Design design(d.truth.design, d.exog, n);
    d.fixed = design.matrix(d.truth.gamma) * d.truth.beta;
    d.complete.resize(n);
    for (std::size_t t = 0; t < n; ++t)
        d.complete[t] = cfg.scenario == Scenario::FullyRandom ? d.errors[t]
                                                              : d.fixed(static_cast<Eigen::Index>(t)) + d.errors[t];
    std::mt19937_64 rng(seed_hash({cfg.base_seed, seed_stream::mask, sc, n, replicate}));
    const std::size_t min_obs = std::max<std::size_t>(2 * design.columns(), 10);
    d.series.mask = mcar_mask(n, cfg.missing_fraction, min_obs, rng, d.mask_redraws);
    d.series.values = d.complete;
    return d;
}

// ---------------------------------------------------------------------------
// Metrics

enum class Metric { AlphaRelL1, DivAcv, BetaRelL1, BetaAbsL1, DivIrf, RmseMissing };

inline std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::AlphaRelL1: return "alpha_rel_l1";
        case Metric::DivAcv: return "div_acv";
        case Metric::BetaRelL1: return "beta_rel_l1";
        case Metric::BetaAbsL1: return "beta_abs_l1";
        case Metric::DivIrf: return "div_irf";
        case Metric::RmseMissing: return "rmse_missing";
    }
    return "unknown";
}

inline constexpr Metric kAllMetrics[] = {Metric::AlphaRelL1, Metric::DivAcv,  Metric::BetaRelL1,
                                         Metric::BetaAbsL1,  Metric::DivIrf, Metric::RmseMissing};

inline bool metric_applies(Scenario s, Metric m) {
    switch (m) {
        case Metric::AlphaRelL1: return s != Scenario::AepError;
        case Metric::DivAcv: return s == Scenario::AepError;
        case Metric::BetaRelL1: return s != Scenario::FullyRandom;
        case Metric::BetaAbsL1: return s == Scenario::FullyRandom;
        case Metric::DivIrf: return s != Scenario::FullyRandom;
        case Metric::RmseMissing: return true;
    }
    return false;
}

inline std::vector<double> alpha_vector(const CovarianceSpec& a) {
    std::vector<double> v{a.c0, a.c1, a.lambda_m};
    if (a.uses_smoothness()) v.push_back(a.nu);
    if (a.is_periodic()) v.push_back(a.lambda_p);
    return v;
}

/// Autocovariance of the error process implied by a covariance and, for AEP
/// errors, the marginal transform.
inline std::vector<double> error_acv(const CovarianceSpec& alpha, const std::optional<AepParams>& theta, std::size_t n) {
    if (!theta) return acv_sequence(alpha, n);
    CovarianceSpec unit = alpha;
    const double total = alpha.total_variance();
    unit.c0 /= total;
    unit.c1 /= total;
    return AepTransformedAcv(*theta).sequence(unit, n);
}

struct MetricContext {
    Scenario scenario;
    const ScenarioTruth* truth;
    std::size_t n;
    std::optional<double> rmse;  // supplied by the caller when predictions exist
    const std::vector<double>* true_error_acv = nullptr;  // optional cache
};

inline double compute_metric(Metric m, const ModelFit& fit, const MetricContext& ctx) {
    if (!metric_applies(ctx.scenario, m))
        throw SpecError("metric " + std::string(to_string(m)) + " is not defined for scenario " +
                        std::string(to_string(ctx.scenario)));
    const auto& t = *ctx.truth;
    switch (m) {
        case Metric::AlphaRelL1: {
            const auto est = alpha_vector(fit.alpha), tru = alpha_vector(t.alpha);
            if (est.size() != tru.size()) throw SpecError("fitted and true covariance families differ");
            double s = 0.0;
            for (std::size_t i = 0; i < tru.size(); ++i) s += std::abs((est[i] - tru[i]) / tru[i]);
            return s;
        }
        case Metric::DivAcv: {
            const auto truth_acv = ctx.true_error_acv ? *ctx.true_error_acv : error_acv(t.alpha, t.theta, ctx.n);
            const auto est = error_acv(fit.alpha, fit.theta, ctx.n);
            double s = 0.0;
            for (std::size_t i = 0; i < ctx.n; ++i) s += std::abs(est[i] - truth_acv[i]);
            return s;
        }
        case Metric::BetaRelL1:
        case Metric::BetaAbsL1: {
            if (fit.beta.size() != t.beta.size()) throw SpecError("fitted and true coefficient counts differ");
            double s = 0.0;
            for (Eigen::Index i = 0; i < t.beta.size(); ++i) {
                const double diff = std::abs(fit.beta(i) - t.beta(i));
                if (m == Metric::BetaRelL1) {
                    if (t.beta(i) == 0.0) throw SpecError("relative coefficient error is undefined for a zero coefficient");
                    s += diff / std::abs(t.beta(i));
                } else {
                    s += diff;
                }
            }
            return s;
        }
        case Metric::DivIrf: {
            if (!fit.gamma) throw SpecError("fit has no IRF parameters");
            const auto a = irf_weights(*fit.gamma, t.irf_window), b = irf_weights(t.gamma, t.irf_window);
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
            return s;
        }
        case Metric::RmseMissing:
            if (!ctx.rmse) throw SpecError("RMSE needs predictions at the missing times");
            return *ctx.rmse;
    }
    return 0.0;
}

/// RMSE of predictions at every masked time against the complete values.
inline std::optional<double> missing_rmse(const ScenarioData& d, const ModelFit& fit) {
    std::vector<std::size_t> targets;
    for (std::size_t t = 0; t < d.series.size(); ++t)
        if (!d.series.mask[t]) targets.push_back(t + 1);
    if (targets.empty()) return std::nullopt;
    const auto p = predict(d.series, fit, d.truth.design, d.exog, targets);
    double s = 0.0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
        const double e = p.mean[j] - d.complete[targets[j] - 1];
        s += e * e;
    }
    return std::sqrt(s / double(targets.size()));
}

inline std::map<Metric, double> metrics(const ModelFit& fit, const ScenarioData& d, Scenario s,
                                        const std::vector<double>* true_error_acv = nullptr) {
    MetricContext ctx{s, &d.truth, d.series.size(), missing_rmse(d, fit), true_error_acv};
    std::map<Metric, double> out;
    for (auto m : kAllMetrics) {
        if (!metric_applies(s, m)) continue;
        if (m == Metric::RmseMissing && !ctx.rmse) continue;
        out[m] = compute_metric(m, fit, ctx);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Study runner

inline std::vector<EstimationMethod> default_methods(Scenario s) {
    std::vector<EstimationMethod> m{EstimationMethod::GaussianWhittle, EstimationMethod::GaussianExact,
                                    EstimationMethod::TwoStage};
    if (s == Scenario::AepError) m.push_back(EstimationMethod::AepExact);
    return m;
}

/// Model specification fitted in a scenario: the generating design with a
/// fully free Matern covariance.
inline ModelSpec scenario_model(const ScenarioTruth& truth, EstimationMethod method) {
    ModelSpec spec;
    spec.design = truth.design;
    spec.covariance.family = CovarianceFamily::Matern;
    spec.method = method;
    return spec;
}

struct StudyConfig {
    std::vector<Scenario> scenarios{Scenario::StandardMixed};
    std::vector<std::size_t> sizes{256};
    std::size_t replicates = 100;
    double missing_fraction = 0.25;
    std::uint64_t base_seed = 0;
    std::vector<EstimationMethod> methods;  // empty: all applicable to each scenario
    OptimConfig optim;
    std::size_t threads = 1;
};

struct StudyRow {
    Scenario scenario;
    std::size_t n;
    std::size_t replicate;
    EstimationMethod method;
    Metric metric;
    double value;
};

struct StudyRun {
    Scenario scenario;
    std::size_t n;
    std::size_t replicate;
    EstimationMethod method;
    bool converged;
    double objective;
    double seconds;
};

struct StudyFailure {
    Scenario scenario;
    std::size_t n;
    std::size_t replicate;
    EstimationMethod method;
    std::string message;
};

/// Boxplot statistics with whiskers at the minimum and 90th percentile; the
/// top decile is listed as points. `cutoff_count` counts points beyond
/// q3 + 3 IQR, the ones a display would clip.
struct BoxSummary {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, p90 = 0, max = 0;
    std::vector<double> upper_points;
    std::size_t cutoff_count = 0;
};

inline double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = q * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxSummary box_summary(std::vector<double> v) {
    BoxSummary b;
    std::sort(v.begin(), v.end());
    b.count = v.size();
    if (v.empty()) return b;
    b.min = v.front();
    b.max = v.back();
    b.q1 = quantile_linear(v, 0.25);
    b.median = quantile_linear(v, 0.5);
    b.q3 = quantile_linear(v, 0.75);
    b.p90 = quantile_linear(v, 0.9);
    const double cut = b.q3 + 3.0 * (b.q3 - b.q1);
    for (double x : v) {
        if (x > b.p90) b.upper_points.push_back(x);
        if (x > cut) ++b.cutoff_count;
    }
    return b;
}

struct StudyResult {
    std::vector<StudyRow> rows;
    std::vector<StudyRun> runs;
    std::vector<StudyFailure> failures;

    std::vector<double> values(Scenario s, std::size_t n, EstimationMethod m, Metric metric) const {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.scenario == s && r.n == n && r.method == m && r.metric == metric) v.push_back(r.value);
        return v;
    }

    double median(Scenario s, std::size_t n, EstimationMethod m, Metric metric) const {
        return box_summary(values(s, n, m, metric)).median;
    }
};

/// Fits every method to one replicate and records metrics. Failures are
/// recorded, not thrown.
inline void run_replicate(const StudyConfig& cfg, Scenario scenario, std::size_t n, std::size_t replicate,
                          const std::vector<double>* true_error_acv, StudyResult& out) {
    ScenarioConfig sc{scenario, n, cfg.missing_fraction, cfg.base_seed, std::nullopt};
    ScenarioData data;
    try {
        data = gen_scenario(sc, replicate);
    } catch (const std::exception& e) {
        for (auto m : cfg.methods.empty() ? default_methods(scenario) : cfg.methods)
            out.failures.push_back({scenario, n, replicate, m, std::string("generation: ") + e.what()});
        return;
    }
    for (auto method : cfg.methods.empty() ? default_methods(scenario) : cfg.methods) {
        OptimConfig oc = cfg.optim;
        oc.seed = seed_hash({cfg.base_seed, seed_stream::method, static_cast<std::uint64_t>(scenario), n, replicate,
                             static_cast<std::uint64_t>(method)});
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto f = fit(data.series, data.exog, scenario_model(data.truth, method), oc);
            const auto met = metrics(f, data, scenario, true_error_acv);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.runs.push_back({scenario, n, replicate, method, f.report.converged, f.objective, secs});
            for (const auto& [k, v] : met) out.rows.push_back({scenario, n, replicate, method, k, v});
        } catch (const std::exception& e) {
            out.failures.push_back({scenario, n, replicate, method, e.what()});
        }
    }
}

inline StudyResult run_study(const StudyConfig& cfg) {
    struct Task {
        Scenario scenario;
        std::size_t n, replicate;
    };
    std::vector<Task> tasks;
    for (auto s : cfg.scenarios)
        for (auto n : cfg.sizes)
            for (std::size_t r = 0; r < cfg.replicates; ++r) tasks.push_back({s, n, r});

    // True error autocovariances for the AEP scenario are shared by all replicates.
    std::map<std::pair<Scenario, std::size_t>, std::vector<double>> acv_cache;
    for (auto s : cfg.scenarios)
        for (auto n : cfg.sizes)
            if (s == Scenario::AepError) {
                const auto t = default_truth(s);
                acv_cache[{s, n}] = error_acv(t.alpha, t.theta, n);
            }

    std::vector<StudyResult> partial(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t i) {
        const auto& t = tasks[i];
        const auto it = acv_cache.find({t.scenario, t.n});
        run_replicate(cfg, t.scenario, t.n, t.replicate, it == acv_cache.end() ? nullptr : &it->second, partial[i]);
    });
    StudyResult out;
    for (auto& p : partial) {
        out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
        out.runs.insert(out.runs.end(), p.runs.begin(), p.runs.end());
        out.failures.insert(out.failures.end(), p.failures.begin(), p.failures.end());
    }
    return out;
}

/// Long-format CSV: scenario,n,replicate,method,metric,value.
inline void write_results_csv(const StudyResult& r, std::ostream& os) {
    os << "scenario,n,replicate,method,metric,value\n";
    os.precision(17);
    for (const auto& row : r.rows)
        os << to_string(row.scenario) << ',' << row.n << ',' << row.replicate << ',' << to_string(row.method) << ','
           << to_string(row.metric) << ',' << row.value << '\n';
}

/// Per-fit wall times and convergence; kept apart from the deterministic results.
inline void write_timings_csv(const StudyResult& r, std::ostream& os) {
    os << "scenario,n,replicate,method,converged,objective,seconds\n";
    os.precision(17);
    for (const auto& run : r.runs)
        os << to_string(run.scenario) << ',' << run.n << ',' << run.replicate << ',' << to_string(run.method) << ','
           << (run.converged ? 1 : 0) << ',' << run.objective << ',' << run.seconds << '\n';
}

inline nlohmann::json study_summary(const StudyResult& r) {
    std::map<std::string, std::vector<double>> groups;
    std::map<std::string, nlohmann::json> keys;
    for (const auto& row : r.rows) {
        const std::string key = std::string(to_string(row.scenario)) + "/" + std::to_string(row.n) + "/" +
                                std::string(to_string(row.method)) + "/" + std::string(to_string(row.metric));
        groups[key].push_back(row.value);
        keys[key] = {{"scenario", to_string(row.scenario)},
                     {"n", row.n},
                     {"method", to_string(row.method)},
                     {"metric", to_string(row.metric)}};
    }
    nlohmann::json out = nlohmann::json::object();
    out["groups"] = nlohmann::json::array();
    for (auto& [key, values] : groups) {
        const auto b = box_summary(values);
        auto j = keys[key];
        j["count"] = b.count;
        j["min"] = b.min;
        j["q1"] = b.q1;
        j["median"] = b.median;
        j["q3"] = b.q3;
        j["p90"] = b.p90;
        j["max"] = b.max;
        j["upper_points"] = b.upper_points;
        j["cutoff_count"] = b.cutoff_count;
        out["groups"].push_back(j);
    }
    std::size_t nonconverged = 0;
    for (const auto& run : r.runs) nonconverged += run.converged ? 0 : 1;
    out["fits"] = r.runs.size();
    out["nonconverged"] = nonconverged;
    out["failures"] = nlohmann::json::array();
    for (const auto& f : r.failures)
        out["failures"].push_back({{"scenario", to_string(f.scenario)},
                                   {"n", f.n},
                                   {"replicate", f.replicate},
                                   {"method", to_string(f.method)},
                                   {"message", f.message}});
    return out;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_SIMSTUDY_HPP
