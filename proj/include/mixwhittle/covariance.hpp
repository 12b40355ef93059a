#ifndef MIXWHITTLE_COVARIANCE_HPP
#define MIXWHITTLE_COVARIANCE_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "mixwhittle/error.hpp"
#include "mixwhittle/special.hpp"

namespace mixwhittle {

enum class CovarianceFamily { Exponential, Matern, MaternPeriodic };

inline std::string_view to_string(CovarianceFamily f) {
    switch (f) {
        case CovarianceFamily::Exponential: return "exponential";
        case CovarianceFamily::Matern: return "matern";
        case CovarianceFamily::MaternPeriodic: return "matern_periodic";
    }
    return "unknown";
}

inline CovarianceFamily covariance_family_from_string(std::string_view s) {
    if (s == "exponential") return CovarianceFamily::Exponential;
    if (s == "matern") return CovarianceFamily::Matern;
    if (s == "matern_periodic") return CovarianceFamily::MaternPeriodic;
    throw SpecError("unknown covariance family '" + std::string(s) + "'");
}

inline constexpr double kMaxSmoothness = 50.0;

/// Stationary error covariance: a nugget c0 added at lag zero on top of a
/// correlated component with partial sill c1.
///
/// Lags are in sampling steps. Only the fields used by `family` are read:
/// Exponential uses (c0, c1, lambda_m); Matern adds nu; MaternPeriodic adds
/// lambda_p and the fixed period.
struct CovarianceSpec {
    CovarianceFamily family = CovarianceFamily::Matern;
    double c0 = 0.0;
    double c1 = 1.0;
    double lambda_m = 1.0;
    double nu = 0.5;
    double lambda_p = 1.0;
    double period = 12.0;

    double total_variance() const noexcept { return c0 + c1; }

    bool uses_smoothness() const noexcept { return family != CovarianceFamily::Exponential; }
    bool is_periodic() const noexcept { return family == CovarianceFamily::MaternPeriodic; }

    void validate() const {
        auto bad = [](const char* name, double v) {
            throw DomainError(std::string("covariance parameter ") + name + " out of domain: " + std::to_string(v));
        };
        if (!(c0 >= 0.0) || !std::isfinite(c0)) bad("c0", c0);
        if (!(c1 >= 0.0) || !std::isfinite(c1)) bad("c1", c1);
        if (!(lambda_m > 0.0) || !std::isfinite(lambda_m)) bad("lambda_m", lambda_m);
        if (uses_smoothness() && (!(nu > 0.0) || nu > kMaxSmoothness)) bad("nu", nu);
        if (is_periodic()) {
            if (!(lambda_p > 0.0) || !std::isfinite(lambda_p)) bad("lambda_p", lambda_p);
            if (!(period > 0.0) || !std::isfinite(period)) bad("period", period);
        }
    }
};

namespace detail {

// Correlated part of the Matern covariance at positive lag, given a
// precomputed Bessel evaluator for the smoothness.
inline double matern_correlated(const CovarianceSpec& s, const BesselK& bessel, double tau) {
    if (s.c1 == 0.0) return 0.0;
    const double x = 2.0 * std::sqrt(s.nu) * tau / s.lambda_m;
    if (x < 1e-12) return s.c1;
    const double log_value = std::log(s.c1) - (s.nu - 1.0) * std::numbers::ln2 - std::lgamma(s.nu) +
                             s.nu * std::log(x) + bessel.log_value(x);
    return std::exp(log_value);
}

inline double periodic_kernel(const CovarianceSpec& s, double tau) {
    const double sn = std::sin(std::numbers::pi * tau / s.period);
    return std::exp(-2.0 * sn * sn / (s.lambda_p * s.lambda_p));
}

inline double exponential_correlated(const CovarianceSpec& s, double tau) { return s.c1 * std::exp(-tau / s.lambda_m); }

}  // namespace detail

/// Covariance at a real-valued lag. Integer lags are the supported use; this
/// overload exists for checking the Bessel path at arbitrary arguments.
inline double acv_continuous(const CovarianceSpec& spec, double tau) {
    spec.validate();
    if (!(tau >= 0.0)) throw DomainError("acv: lag must be non-negative");
    if (tau == 0.0) return spec.total_variance();
    if (!spec.uses_smoothness()) return detail::exponential_correlated(spec, tau);
    const BesselK bessel(spec.nu);
    const double m = detail::matern_correlated(spec, bessel, tau);
    return spec.is_periodic() ? m * detail::periodic_kernel(spec, tau) : m;
}

inline double acv(const CovarianceSpec& spec, std::size_t tau) {
    return acv_continuous(spec, static_cast<double>(tau));
}

/// c(0), c(1), ..., c(n-1).
inline std::vector<double> acv_sequence(const CovarianceSpec& spec, std::size_t n) {
    spec.validate();
    if (n == 0) throw LengthError("acv_sequence: length must be at least 1");
    std::vector<double> out(n, 0.0);
    out[0] = spec.total_variance();
    if (spec.c1 == 0.0) return out;
    if (!spec.uses_smoothness()) {
        for (std::size_t t = 1; t < n; ++t) out[t] = detail::exponential_correlated(spec, static_cast<double>(t));
        return out;
    }
    const BesselK bessel(spec.nu);
    for (std::size_t t = 1; t < n; ++t) {
        const double tau = static_cast<double>(t);
        const double m = detail::matern_correlated(spec, bessel, tau);
        // The Matern part decreases monotonically; once it underflows the rest is zero.
        if (m == 0.0) break;
        out[t] = spec.is_periodic() ? m * detail::periodic_kernel(spec, tau) : m;
    }
    return out;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_COVARIANCE_HPP
