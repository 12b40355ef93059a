#ifndef MIXWHITTLE_CLI_HPP
#define MIXWHITTLE_CLI_HPP

// Command implementations behind the mixwhittle executable. Each command is a
// function of (input files, RunConfig) that writes its outputs into cfg.out;
// argument parsing lives in the tool itself.

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixwhittle/aep.hpp"
#include "mixwhittle/config.hpp"
#include "mixwhittle/estimate.hpp"
#include "mixwhittle/ingest.hpp"
#include "mixwhittle/predict.hpp"
#include "mixwhittle/simstudy.hpp"
#include "mixwhittle/special.hpp"

namespace mixwhittle::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNonconverged = 2;

/// Command-line values that override the config file when present.
struct Overrides {
    std::optional<std::string> series, exog, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool deseasonalise_exog = false;
    bool allow_nonconverged = false;
};

inline RunConfig resolve_config(const std::optional<std::string>& config_path, const Overrides& o) {
    json j = json::object();
    if (config_path) {
        auto in = open_input(*config_path);
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw SpecError("cannot parse config '" + *config_path + "': " + e.what());
        }
    }
    RunConfig c = run_config_from_json(j);
    if (o.series) c.series = o.series;
    if (o.exog) c.exog = o.exog;
    if (o.out) c.out = *o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    c.deseasonalise_exog = c.deseasonalise_exog || o.deseasonalise_exog;
    c.allow_nonconverged = c.allow_nonconverged || o.allow_nonconverged;
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string num(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Writes via a temporary file in the same directory, then renames.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw SpecError("cannot write '" + tmp.string() + "'");
        os << content;
        if (!os.flush()) throw SpecError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::filesystem::path out_dir(const RunConfig& c) {
    std::filesystem::path d(c.out);
    std::filesystem::create_directories(d);
    return d;
}

inline json metadata(std::string_view command) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {{"command", std::string(command)}, {"created", buf}};
}

inline json covariance_json(const CovarianceSpec& a) {
    json j{{"family", std::string(to_string(a.family))}, {"c0", a.c0}, {"c1", a.c1}, {"lambda_m", a.lambda_m}};
    if (a.family != CovarianceFamily::Exponential) j["nu"] = a.nu;
    if (a.family == CovarianceFamily::MaternPeriodic) {
        j["lambda_p"] = a.lambda_p;
        j["period"] = a.period;
    }
    return j;
}

inline json aep_json(const AepParams& p) {
    return {{"mu", p.mu}, {"sigma", p.sigma}, {"varsigma", p.varsigma}, {"p1", p.p1}, {"p2", p.p2}};
}

inline json fit_json(const ModelFit& f) {
    json beta = json::object();
    for (std::size_t i = 0; i < f.beta_labels.size(); ++i) beta[f.beta_labels[i]] = f.beta(static_cast<Eigen::Index>(i));
    const auto& r = f.report;
    return {{"method", std::string(to_string(f.method))},
            {"covariance", covariance_json(f.alpha)},
            {"beta", beta},
            {"irf", f.gamma ? json{{"shape", f.gamma->shape}, {"rate", f.gamma->rate}} : json(nullptr)},
            {"aep", f.theta ? aep_json(*f.theta) : json(nullptr)},
            {"objective", f.objective},
            {"log_likelihood", f.log_likelihood()},
            {"observed", f.observed},
            {"aep_clamped", f.clamped},
            {"optimizer",
             {{"converged", r.converged},
              {"iterations", r.iterations},
              {"evaluations", r.evaluations},
              {"rejected", r.rejected},
              {"restarts_used", r.restarts_used},
              {"best_restart", r.best_restart},
              {"restart_values", r.restart_values}}}};
}

// ---------------------------------------------------------------------------
// Inputs

struct Inputs {
    SeriesData data;
    std::optional<ExogenousSeries> exog;
};

inline Inputs load_inputs(const RunConfig& c) {
    if (!c.series) throw SpecError("a response series is required (--series)");
    Inputs in;
    {
        auto f = open_input(*c.series);
        in.data = read_series(f, *c.series);
    }
    if (c.exog) {
        auto f = open_input(*c.exog);
        in.exog = read_exogenous(f, in.data.axis, c.deseasonalise_exog, *c.exog);
    }
    return in;
}

inline json series_json(const Inputs& in) {
    const auto& s = in.data.series;
    const std::size_t n = s.values.size();
    const std::size_t obs = s.observed_indices().size();
    json j{{"time_format", std::string(to_string(in.data.axis.format))},
           {"start", in.data.axis.label(in.data.axis.start)},
           {"step", in.data.axis.step},
           {"n", n},
           {"observed", obs},
           {"missing_fraction", double(n - obs) / double(n)}};
    if (in.exog) j["exog"] = {{"length", in.exog->values.size()}, {"lead", in.exog->lead}};
    return j;
}

inline OptimConfig optimizer(const RunConfig& c) {
    OptimConfig o = c.optimizer;
    o.seed = c.seed;
    return o;
}

/// Outcome of one command: whether every fit converged.
struct Outcome {
    bool converged = true;
};

inline ModelFit fit_model(const Inputs& in, const RunConfig& c) {
    return fit(in.data.series, in.exog, c.model, optimizer(c));
}

// ---------------------------------------------------------------------------
// Commands

inline Outcome cmd_fit(const RunConfig& c) {
    const auto dir = out_dir(c);
    const auto in = load_inputs(c);
    const auto f = fit_model(in, c);
    json report = fit_json(f);
    report["series"] = series_json(in);
    report["metadata"] = metadata("fit");
    write_atomic(dir / "fit.json", report.dump(2) + "\n");
    return {f.report.converged};
}

namespace detail {

inline std::string prediction_csv(const Prediction& p, const ModelFit& f, const TimeAxis& axis, double level) {
    std::ostringstream os;
    os << "time,mean,variance,lower,upper\n";
    const double z = normal_quantile(0.5 + 0.5 * level);
    for (std::size_t j = 0; j < p.times.size(); ++j) {
        double lo = p.mean[j] - z * std::sqrt(p.variance[j]);
        double hi = p.mean[j] + z * std::sqrt(p.variance[j]);
        if (f.theta) {
            lo = p.quantiles[0][j];
            hi = p.quantiles[1][j];
        }
        os << axis.label_at(p.times[j] - 1) << ',' << num(p.mean[j]) << ',' << num(p.variance[j]) << ',' << num(lo)
           << ',' << num(hi) << '\n';
    }
    return os.str();
}

// AEP fits map the latent Gaussian interval through the marginal transform.
inline Prediction run_prediction(const Inputs& in, const ModelFit& f, const RunConfig& c,
                                 const std::vector<std::size_t>& targets) {
    if (f.theta)
        return krige_aep(in.data.series, f, c.model.design, in.exog, targets,
                         {0.5 - 0.5 * c.predict.level, 0.5 + 0.5 * c.predict.level});
    return simple_krige(in.data.series, f, c.model.design, in.exog, targets);
}

}  // namespace detail

inline Outcome cmd_fill(const RunConfig& c) {
    const auto dir = out_dir(c);
    const auto in = load_inputs(c);
    const std::size_t n = in.data.series.values.size();
    std::vector<std::size_t> targets = c.predict.targets;
    if (targets.empty()) {
        for (std::size_t t = 0; t < n; ++t)
            if (!in.data.series.mask[t]) targets.push_back(t + 1);
    }
    for (auto t : targets)
        if (t == 0 || t > n) throw DomainError("fill targets must lie in 1.." + std::to_string(n) + "; use forecast beyond the end");
    const auto f = fit_model(in, c);
    std::string csv = "time,mean,variance,lower,upper\n";
    if (!targets.empty()) csv = detail::prediction_csv(detail::run_prediction(in, f, c, targets), f, in.data.axis, c.predict.level);
    write_atomic(dir / "fill.csv", csv);
    json report = fit_json(f);
    report["series"] = series_json(in);
    report["metadata"] = metadata("fill");
    write_atomic(dir / "fit.json", report.dump(2) + "\n");
    return {f.report.converged};
}

inline Outcome cmd_forecast(const RunConfig& c) {
    const auto dir = out_dir(c);
    const auto in = load_inputs(c);
    if (c.predict.horizon == 0) throw SpecError("predict.horizon must be at least 1");
    const std::size_t n = in.data.series.values.size();
    std::vector<std::size_t> targets(c.predict.horizon);
    std::iota(targets.begin(), targets.end(), n + 1);
    const auto f = fit_model(in, c);
    write_atomic(dir / "forecast.csv",
                 detail::prediction_csv(detail::run_prediction(in, f, c, targets), f, in.data.axis, c.predict.level));
    json report = fit_json(f);
    report["series"] = series_json(in);
    report["metadata"] = metadata("forecast");
    write_atomic(dir / "fit.json", report.dump(2) + "\n");
    return {f.report.converged};
}

/// Residual diagnostics: empirical against model autocovariance, and Q-Q data
/// of the observed residuals against Gaussian and fitted-AEP quantiles.
inline Outcome cmd_diagnose(const RunConfig& c) {
    const auto dir = out_dir(c);
    const auto in = load_inputs(c);
    const auto& s = in.data.series;
    const std::size_t n = s.values.size();
    const auto f = fit_model(in, c);
    const Eigen::VectorXd fixed = fixed_term(f, c.model.design, in.exog, n);
    std::vector<double> resid(n, 0.0);
    std::vector<double> obs;
    for (std::size_t t = 0; t < n; ++t)
        if (s.mask[t]) {
            resid[t] = s.values[t] - fixed(static_cast<Eigen::Index>(t));
            obs.push_back(resid[t]);
        }

    const auto emp = empirical_acv(resid, s.mask, c.diagnose.max_lag);
    const auto model = error_acv(f.alpha, f.theta, emp.size());
    std::ostringstream acv;
    acv << "lag,empirical,model\n";
    for (std::size_t k = 0; k < emp.size(); ++k) acv << k << ',' << num(emp[k]) << ',' << num(model[k]) << '\n';
    write_atomic(dir / "acv.csv", acv.str());

    const double mean = std::accumulate(obs.begin(), obs.end(), 0.0) / double(obs.size());
    double var = 0.0;
    for (double r : obs) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / double(obs.size() - 1));
    const auto marginal = fit_aep_marginal(obs, optimizer(c));
    const AepDistribution dist(marginal.params);
    std::vector<double> sorted = obs;
    std::sort(sorted.begin(), sorted.end());
    std::ostringstream qq;
    qq << "rank,p,residual,gaussian,aep\n";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double p = (double(i) + 0.5) / double(sorted.size());
        qq << i + 1 << ',' << num(p) << ',' << num(sorted[i]) << ',' << num(mean + sd * normal_quantile(p)) << ','
           << num(dist.quantile(p)) << '\n';
    }
    write_atomic(dir / "qq.csv", qq.str());

    json report{{"fit", fit_json(f)},
                {"series", series_json(in)},
                {"residuals", {{"count", obs.size()}, {"mean", mean}, {"sd", sd}}},
                {"aep_marginal",
                 {{"params", aep_json(marginal.params)},
                  {"nll", marginal.nll},
                  {"gaussian_nll", marginal.start_nll},
                  {"converged", marginal.report.converged}}},
                {"metadata", metadata("diagnose")}};
    write_atomic(dir / "diagnose.json", report.dump(2) + "\n");
    return {f.report.converged && marginal.report.converged};
}

inline Outcome cmd_simulate(const RunConfig& c) {
    const auto dir = out_dir(c);
    StudyConfig sc;
    sc.scenarios = c.simulate.scenarios;
    sc.sizes = c.simulate.sizes;
    sc.replicates = c.simulate.replicates;
    sc.missing_fraction = c.simulate.missing_fraction;
    sc.base_seed = c.seed;
    sc.methods = c.simulate.methods;
    sc.optim = optimizer(c);
    sc.threads = c.threads;
    const auto r = run_study(sc);
    std::ostringstream results, timings;
    write_results_csv(r, results);
    write_timings_csv(r, timings);
    write_atomic(dir / "results.csv", results.str());
    write_atomic(dir / "timings.csv", timings.str());
    json summary = study_summary(r);
    summary["metadata"] = metadata("simulate");
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
    const bool ok = r.failures.empty() &&
                    std::all_of(r.runs.begin(), r.runs.end(), [](const StudyRun& run) { return run.converged; });
    return {ok};
}

/// Compares the prediction error of two fitted configurations on artificial
/// gaps. Without --series the data are simulated from the configured scenario.
inline Outcome cmd_gap_experiment(const RunConfig& c) {
    const auto dir = out_dir(c);
    const auto& g = c.gap_experiment;
    ObservedSeries series;
    std::optional<ExogenousSeries> exog;
    DesignSpec design = c.model.design;
    json source;
    if (c.series) {
        const auto in = load_inputs(c);
        series = in.data.series;
        exog = in.exog;
        source = series_json(in);
    } else {
        ScenarioConfig sc{g.scenario, g.n, g.missing_fraction, c.seed, std::nullopt};
        auto d = gen_scenario(sc, 0);
        series = std::move(d.series);
        exog = std::move(d.exog);
        design = scenario_model(d.truth, EstimationMethod::GaussianWhittle).design;
        source = {{"simulated", std::string(to_string(g.scenario))}, {"n", g.n}, {"missing_fraction", g.missing_fraction}};
    }
    auto spec_for = [&](const GapModel& m) {
        ModelSpec s = c.model;
        s.design = design;
        s.method = m.method;
        s.covariance = m.covariance;
        return s;
    };
    const auto opt = optimizer(c);
    const auto fit_a = fit(series, exog, spec_for(g.a), opt);
    const auto fit_b = fit(series, exog, spec_for(g.b), opt);
    const auto r = gap_experiment(series, design, exog, fit_a, fit_b, g.plans, g.repeats, c.seed, c.threads);

    auto plan_name = [](const GapPlan& p) { return std::to_string(p.count) + "x" + std::to_string(p.length); };
    std::ostringstream rows, summary;
    rows << "plan,repeat,rmse_a,rmse_b,reduction_percent\n";
    summary << "plan,rmse_a,rmse_b,reduction_percent,median_repeat_reduction_percent\n";
    json plans = json::array();
    for (const auto& p : r.plans) {
        for (std::size_t k = 0; k < p.rmse_a.size(); ++k)
            rows << plan_name(p.plan) << ',' << k << ',' << num(p.rmse_a[k]) << ',' << num(p.rmse_b[k]) << ','
                 << num(mixwhittle::detail::reduction(p.rmse_a[k], p.rmse_b[k])) << '\n';
        summary << plan_name(p.plan) << ',' << num(p.overall_rmse_a) << ',' << num(p.overall_rmse_b) << ','
                << fixed2(p.reduction_percent) << ',' << fixed2(p.median_repeat_reduction) << '\n';
        plans.push_back({{"plan", plan_name(p.plan)},
                         {"rmse_a", p.overall_rmse_a},
                         {"rmse_b", p.overall_rmse_b},
                         {"reduction_percent", p.reduction_percent},
                         {"median_repeat_reduction_percent", p.median_repeat_reduction}});
    }
    summary << "all,,,," << fixed2(r.median_reduction) << '\n';
    write_atomic(dir / "gap_experiment.csv", rows.str());
    write_atomic(dir / "gap_summary.csv", summary.str());
    json report{{"data", source},
                {"repeats", g.repeats},
                {"plans", plans},
                {"median_reduction_percent", r.median_reduction},
                {"fit_a", fit_json(fit_a)},
                {"fit_b", fit_json(fit_b)},
                {"metadata", metadata("gap-experiment")}};
    write_atomic(dir / "gap_summary.json", report.dump(2) + "\n");
    return {fit_a.report.converged && fit_b.report.converged};
}

// ---------------------------------------------------------------------------
// Dispatch

inline json error_json(const std::exception& e) {
    std::string type = "Error";
    if (dynamic_cast<const IngestError*>(&e)) type = "IngestError";
    else if (dynamic_cast<const SpecError*>(&e)) type = "SpecError";
    else if (dynamic_cast<const DomainError*>(&e)) type = "DomainError";
    else if (dynamic_cast<const LengthError*>(&e)) type = "LengthError";
    else if (dynamic_cast<const NumericalError*>(&e)) type = "NumericalError";
    else if (dynamic_cast<const SingularError*>(&e)) type = "SingularError";
    else if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) type = "IOError";
    json j{{"type", type}, {"message", e.what()}};
    if (const auto* ie = dynamic_cast<const IngestError*>(&e); ie && !ie->rows().empty()) j["rows"] = ie->rows();
    return {{"error", j}};
}

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"fit", "fill", "forecast", "diagnose", "simulate", "gap-experiment"};
    return names;
}

/// Runs one command and maps the result to an exit code. Errors are printed as
/// JSON on `err` and, when the output directory is usable, saved as error.json.
inline int run(const std::string& command, const std::optional<std::string>& config_path, const Overrides& o,
               std::ostream& err = std::cerr) {
    std::optional<std::string> out = o.out;
    try {
        const RunConfig c = resolve_config(config_path, o);
        out = c.out;
        const auto dir = out_dir(c);
        write_atomic(dir / "config.json", to_json(c).dump(2) + "\n");
        Outcome r;
        if (command == "fit") r = cmd_fit(c);
        else if (command == "fill") r = cmd_fill(c);
        else if (command == "forecast") r = cmd_forecast(c);
        else if (command == "diagnose") r = cmd_diagnose(c);
        else if (command == "simulate") r = cmd_simulate(c);
        else if (command == "gap-experiment") r = cmd_gap_experiment(c);
        else throw SpecError("unknown command '" + command + "'");
        if (!r.converged && !c.allow_nonconverged) {
            err << json{{"warning", "optimizer did not converge; outputs were written"}}.dump() << '\n';
            return kExitNonconverged;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        const auto j = error_json(e);
        err << j.dump() << '\n';
        try {
            std::filesystem::path dir(out.value_or("."));
            std::filesystem::create_directories(dir);
            write_atomic(dir / "error.json", j.dump(2) + "\n");
        } catch (...) {
        }
        return kExitError;
    }
}

}  // namespace mixwhittle::cli

#endif  // MIXWHITTLE_CLI_HPP
