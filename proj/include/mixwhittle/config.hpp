#ifndef MIXWHITTLE_CONFIG_HPP
#define MIXWHITTLE_CONFIG_HPP

// JSON job description for the command-line tool. Every field has a default;
// unknown keys are rejected at every level so that typos fail loudly.

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixwhittle/design.hpp"
#include "mixwhittle/estimate.hpp"
#include "mixwhittle/optimize.hpp"
#include "mixwhittle/predict.hpp"
#include "mixwhittle/simstudy.hpp"

namespace mixwhittle {

struct PredictConfig {
    std::vector<std::size_t> targets;  // fill: 1-based times; empty means every missing time
    std::size_t horizon = 12;          // forecast steps past the end of the series
    double level = 0.95;               // central interval probability
};

struct DiagnoseConfig {
    std::size_t max_lag = 60;
};

struct SimulateConfig {
    std::vector<Scenario> scenarios{Scenario::StandardMixed, Scenario::FullyRandom, Scenario::AepError};
    std::vector<std::size_t> sizes{256, 512, 1024, 2048};
    std::size_t replicates = 100;
    double missing_fraction = 0.25;
    std::vector<EstimationMethod> methods;  // empty: every method applicable to the scenario
};

/// One side of a gap-experiment comparison. The design is shared.
struct GapModel {
    EstimationMethod method = EstimationMethod::GaussianWhittle;
    CovarianceModel covariance;
};

inline GapModel ml_exponential() {
    GapModel m;
    m.method = EstimationMethod::GaussianExact;
    m.covariance.family = CovarianceFamily::Exponential;
    return m;
}

struct GapConfig {
    std::size_t repeats = 250;
    std::vector<GapPlan> plans = default_gap_plans();
    GapModel a;
    GapModel b = ml_exponential();
    // Used when no series is given: data are simulated from this scenario.
    Scenario scenario = Scenario::StandardMixed;
    std::size_t n = 720;
    double missing_fraction = 0.05;
};

struct RunConfig {
    std::optional<std::string> series;
    std::optional<std::string> exog;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool deseasonalise_exog = false;
    bool allow_nonconverged = false;
    ModelSpec model = default_model();
    OptimConfig optimizer;
    PredictConfig predict;
    DiagnoseConfig diagnose;
    SimulateConfig simulate;
    GapConfig gap_experiment;

    static ModelSpec default_model() {
        ModelSpec m;
        m.design.components = {DesignComponent::intercept(), DesignComponent::linear_trend(),
                               DesignComponent::seasonal(12.0)};
        return m;
    }

    void validate() const {
        model.design.validate();
        if (threads == 0) throw SpecError("threads must be at least 1");
        if (optimizer.restarts == 0) throw SpecError("optimizer.restarts must be at least 1");
        if (!(optimizer.tolerance > 0.0)) throw SpecError("optimizer.tolerance must be positive");
        if (!(predict.level > 0.0 && predict.level < 1.0)) throw SpecError("predict.level must be in (0, 1)");
        if (simulate.replicates == 0) throw SpecError("simulate.replicates must be at least 1");
        if (!(simulate.missing_fraction >= 0.0 && simulate.missing_fraction < 1.0))
            throw SpecError("simulate.missing_fraction must be in [0, 1)");
        if (gap_experiment.repeats == 0) throw SpecError("gap_experiment.repeats must be at least 1");
        for (const auto& p : gap_experiment.plans)
            if (p.count == 0 || p.length == 0) throw SpecError("gap plans need positive count and length");
    }
};

// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw SpecError(where + " must be a JSON object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw SpecError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& into, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw SpecError("bad value for '" + std::string(key) + "' in " + where);
    }
}

inline DesignComponent component_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type")) throw SpecError("design components need a 'type'");
    const auto type = j.at("type").get<std::string>();
    if (type == "intercept") {
        allow_keys(j, "design component", {"type"});
        return DesignComponent::intercept();
    }
    if (type == "trend") {
        allow_keys(j, "design component", {"type"});
        return DesignComponent::linear_trend();
    }
    if (type == "seasonal") {
        allow_keys(j, "seasonal component", {"type", "period"});
        double period = 12.0;
        read(j, "period", period, "seasonal component");
        return DesignComponent::seasonal(period);
    }
    if (type == "splines") {
        allow_keys(j, "splines component", {"type", "count"});
        std::size_t count = 4;
        read(j, "count", count, "splines component");
        return DesignComponent::splines(count);
    }
    if (type == "irf") {
        allow_keys(j, "irf component", {"type", "window"});
        std::size_t window = kDefaultIrfWindow;
        read(j, "window", window, "irf component");
        return DesignComponent::irf(window);
    }
    throw SpecError("unknown design component type '" + type + "'");
}

inline json component_to_json(const DesignComponent& c) {
    switch (c.kind) {
        case ComponentKind::Intercept: return {{"type", "intercept"}};
        case ComponentKind::LinearTrend: return {{"type", "trend"}};
        case ComponentKind::SeasonalPair: return {{"type", "seasonal"}, {"period", c.period}};
        case ComponentKind::CyclicSplines: return {{"type", "splines"}, {"count", c.count}};
        case ComponentKind::IrfCovariate: return {{"type", "irf"}, {"window", c.irf_window}};
    }
    return {};
}

inline CovarianceModel covariance_from_json(const json& j, const std::string& where) {
    allow_keys(j, where, {"family", "period", "fixed"});
    CovarianceModel m;
    if (j.contains("family")) m.family = covariance_family_from_string(j.at("family").get<std::string>());
    read(j, "period", m.period, where);
    if (j.contains("fixed")) {
        const auto& f = j.at("fixed");
        allow_keys(f, where + ".fixed", {"c0", "c1", "lambda_m", "nu", "lambda_p"});
        auto opt = [&](const char* k, std::optional<double>& into) {
            if (f.contains(k)) {
                double v = 0.0;
                read(f, k, v, where + ".fixed");
                into = v;
            }
        };
        opt("c0", m.c0);
        opt("c1", m.c1);
        opt("lambda_m", m.lambda_m);
        opt("nu", m.nu);
        opt("lambda_p", m.lambda_p);
    }
    return m;
}

inline json covariance_to_json(const CovarianceModel& m) {
    json fixed = json::object();
    if (m.c0) fixed["c0"] = *m.c0;
    if (m.c1) fixed["c1"] = *m.c1;
    if (m.lambda_m) fixed["lambda_m"] = *m.lambda_m;
    if (m.nu) fixed["nu"] = *m.nu;
    if (m.lambda_p) fixed["lambda_p"] = *m.lambda_p;
    return {{"family", std::string(to_string(m.family))}, {"period", m.period}, {"fixed", fixed}};
}

inline ModelSpec model_from_json(const json& j) {
    allow_keys(j, "model", {"design", "covariance", "method", "profile_whittle_beta", "exclude_zero_frequency",
                            "initial_irf"});
    ModelSpec m = RunConfig::default_model();
    if (j.contains("design")) {
        if (!j.at("design").is_array()) throw SpecError("model.design must be an array");
        m.design.components.clear();
        for (const auto& c : j.at("design")) m.design.components.push_back(component_from_json(c));
    }
    if (j.contains("covariance")) m.covariance = covariance_from_json(j.at("covariance"), "model.covariance");
    if (j.contains("method")) m.method = estimation_method_from_string(j.at("method").get<std::string>());
    read(j, "profile_whittle_beta", m.profile_whittle_beta, "model");
    read(j, "exclude_zero_frequency", m.exclude_zero_frequency, "model");
    if (j.contains("initial_irf")) {
        const auto& g = j.at("initial_irf");
        allow_keys(g, "model.initial_irf", {"shape", "rate"});
        read(g, "shape", m.initial_gamma.shape, "model.initial_irf");
        read(g, "rate", m.initial_gamma.rate, "model.initial_irf");
    }
    return m;
}

inline json model_to_json(const ModelSpec& m) {
    json design = json::array();
    for (const auto& c : m.design.components) design.push_back(component_to_json(c));
    return {{"design", design},
            {"covariance", covariance_to_json(m.covariance)},
            {"method", std::string(to_string(m.method))},
            {"profile_whittle_beta", m.profile_whittle_beta},
            {"exclude_zero_frequency", m.exclude_zero_frequency},
            {"initial_irf", {{"shape", m.initial_gamma.shape}, {"rate", m.initial_gamma.rate}}}};
}

inline GapModel gap_model_from_json(const json& j, const std::string& where, GapModel m) {
    allow_keys(j, where, {"method", "covariance"});
    if (j.contains("method")) m.method = estimation_method_from_string(j.at("method").get<std::string>());
    if (j.contains("covariance")) m.covariance = covariance_from_json(j.at("covariance"), where + ".covariance");
    return m;
}

}  // namespace detail

namespace detail {
inline RunConfig parse_run_config(const nlohmann::json& j) {
    using detail::allow_keys;
    using detail::read;
    allow_keys(j, "config", {"series", "exog", "out", "seed", "threads", "deseasonalise_exog", "allow_nonconverged",
                             "model", "optimizer", "predict", "diagnose", "simulate", "gap_experiment"});
    RunConfig c;
    if (j.contains("series") && !j.at("series").is_null()) read(j, "series", c.series.emplace(), "config");
    if (j.contains("exog") && !j.at("exog").is_null()) read(j, "exog", c.exog.emplace(), "config");
    read(j, "out", c.out, "config");
    read(j, "seed", c.seed, "config");
    read(j, "threads", c.threads, "config");
    read(j, "deseasonalise_exog", c.deseasonalise_exog, "config");
    read(j, "allow_nonconverged", c.allow_nonconverged, "config");
    if (j.contains("model")) c.model = detail::model_from_json(j.at("model"));
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        allow_keys(o, "optimizer", {"max_iterations", "tolerance", "restarts", "initial_step", "jitter"});
        read(o, "max_iterations", c.optimizer.max_iterations, "optimizer");
        read(o, "tolerance", c.optimizer.tolerance, "optimizer");
        read(o, "restarts", c.optimizer.restarts, "optimizer");
        read(o, "initial_step", c.optimizer.initial_step, "optimizer");
        read(o, "jitter", c.optimizer.jitter, "optimizer");
    }
    if (j.contains("predict")) {
        const auto& p = j.at("predict");
        allow_keys(p, "predict", {"targets", "horizon", "level"});
        read(p, "targets", c.predict.targets, "predict");
        read(p, "horizon", c.predict.horizon, "predict");
        read(p, "level", c.predict.level, "predict");
    }
    if (j.contains("diagnose")) {
        const auto& d = j.at("diagnose");
        allow_keys(d, "diagnose", {"max_lag"});
        read(d, "max_lag", c.diagnose.max_lag, "diagnose");
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        allow_keys(s, "simulate", {"scenarios", "sizes", "replicates", "missing_fraction", "methods"});
        if (s.contains("scenarios")) {
            c.simulate.scenarios.clear();
            for (const auto& v : s.at("scenarios")) c.simulate.scenarios.push_back(scenario_from_string(v.get<std::string>()));
        }
        read(s, "sizes", c.simulate.sizes, "simulate");
        read(s, "replicates", c.simulate.replicates, "simulate");
        read(s, "missing_fraction", c.simulate.missing_fraction, "simulate");
        if (s.contains("methods")) {
            c.simulate.methods.clear();
            for (const auto& v : s.at("methods"))
                c.simulate.methods.push_back(estimation_method_from_string(v.get<std::string>()));
        }
    }
    if (j.contains("gap_experiment")) {
        const auto& g = j.at("gap_experiment");
        allow_keys(g, "gap_experiment", {"repeats", "plans", "a", "b", "scenario", "n", "missing_fraction"});
        read(g, "repeats", c.gap_experiment.repeats, "gap_experiment");
        if (g.contains("plans")) {
            c.gap_experiment.plans.clear();
            for (const auto& p : g.at("plans")) {
                allow_keys(p, "gap_experiment.plans", {"count", "length"});
                GapPlan plan;
                read(p, "count", plan.count, "gap_experiment.plans");
                read(p, "length", plan.length, "gap_experiment.plans");
                c.gap_experiment.plans.push_back(plan);
            }
        }
        if (g.contains("a")) c.gap_experiment.a = detail::gap_model_from_json(g.at("a"), "gap_experiment.a", c.gap_experiment.a);
        if (g.contains("b")) c.gap_experiment.b = detail::gap_model_from_json(g.at("b"), "gap_experiment.b", c.gap_experiment.b);
        if (g.contains("scenario")) c.gap_experiment.scenario = scenario_from_string(g.at("scenario").get<std::string>());
        read(g, "n", c.gap_experiment.n, "gap_experiment");
        read(g, "missing_fraction", c.gap_experiment.missing_fraction, "gap_experiment");
    }
    c.validate();
    return c;
}
}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    try {
        return detail::parse_run_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed config: ") + e.what());
    }
}

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    json j;
    j["series"] = c.series ? json(*c.series) : json(nullptr);
    j["exog"] = c.exog ? json(*c.exog) : json(nullptr);
    j["out"] = c.out;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["deseasonalise_exog"] = c.deseasonalise_exog;
    j["allow_nonconverged"] = c.allow_nonconverged;
    j["model"] = detail::model_to_json(c.model);
    j["optimizer"] = {{"max_iterations", c.optimizer.max_iterations},
                      {"tolerance", c.optimizer.tolerance},
                      {"restarts", c.optimizer.restarts},
                      {"initial_step", c.optimizer.initial_step},
                      {"jitter", c.optimizer.jitter}};
    j["predict"] = {{"targets", c.predict.targets}, {"horizon", c.predict.horizon}, {"level", c.predict.level}};
    j["diagnose"] = {{"max_lag", c.diagnose.max_lag}};
    json scenarios = json::array(), methods = json::array();
    for (auto s : c.simulate.scenarios) scenarios.push_back(std::string(to_string(s)));
    for (auto m : c.simulate.methods) methods.push_back(std::string(to_string(m)));
    j["simulate"] = {{"scenarios", scenarios},
                     {"sizes", c.simulate.sizes},
                     {"replicates", c.simulate.replicates},
                     {"missing_fraction", c.simulate.missing_fraction},
                     {"methods", methods}};
    json plans = json::array();
    for (const auto& p : c.gap_experiment.plans) plans.push_back({{"count", p.count}, {"length", p.length}});
    auto side = [](const GapModel& m) {
        return json{{"method", std::string(to_string(m.method))}, {"covariance", detail::covariance_to_json(m.covariance)}};
    };
    j["gap_experiment"] = {{"repeats", c.gap_experiment.repeats},
                           {"plans", plans},
                           {"a", side(c.gap_experiment.a)},
                           {"b", side(c.gap_experiment.b)},
                           {"scenario", std::string(to_string(c.gap_experiment.scenario))},
                           {"n", c.gap_experiment.n},
                           {"missing_fraction", c.gap_experiment.missing_fraction}};
    return j;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_CONFIG_HPP
