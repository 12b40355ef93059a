#ifndef MIXWHITTLE_SPECIAL_HPP
#define MIXWHITTLE_SPECIAL_HPP

// Special functions used by the covariance and AEP code: the modified Bessel
// function of the second kind (Temme series / Steed continued fraction), the
// regularized incomplete gamma functions and their inverses, and the standard
// normal cdf and quantile.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mixwhittle/error.hpp"

namespace mixwhittle {

namespace detail {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kTiny = 1e-300;

// Coefficients of 1/Gamma(z) = sum_k c_k z^k (Abramowitz & Stegun 6.1.34).
inline constexpr double kRecipGamma[] = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
};

}  // namespace detail

/// Modified Bessel function of the second kind K_nu(x) for a fixed order.
///
/// The order-dependent Temme constants are computed once, so evaluating a
/// whole lag sequence at the same smoothness only pays for the series or the
/// continued fraction. Results are returned on the log scale so that large
/// orders at small arguments (and large arguments in general) neither
/// overflow nor underflow.
class BesselK {
public:
    explicit BesselK(double nu) : nu_(std::abs(nu)) {
        if (!std::isfinite(nu_)) throw DomainError("BesselK: order must be finite");
        whole_ = static_cast<int>(nu_ + 0.5);
        mu_ = nu_ - whole_;
        gampl_ = 1.0 / std::tgamma(1.0 + mu_);
        gammi_ = 1.0 / std::tgamma(1.0 - mu_);
        gam2_ = 0.5 * (gammi_ + gampl_);
        if (std::abs(mu_) < 0.05) {
            const double m2 = mu_ * mu_;
            // -(c2 + c4 mu^2 + c6 mu^4 + ...)
            gam1_ = -(detail::kRecipGamma[1] +
                      m2 * (detail::kRecipGamma[3] +
                            m2 * (detail::kRecipGamma[5] +
                                  m2 * (detail::kRecipGamma[7] +
                                        m2 * (detail::kRecipGamma[9] + m2 * detail::kRecipGamma[11])))));
        } else {
            gam1_ = (gammi_ - gampl_) / (2.0 * mu_);
        }
    }

    double order() const noexcept { return nu_; }

    /// log K_nu(x) for x > 0.
    double log_value(double x) const {
        if (!(x > 0.0)) throw DomainError("BesselK: argument must be positive");
        if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
        double kmu = 0.0;
        double k1 = 0.0;
        double log_scale = 0.0;
        if (x <= 2.0) {
            temme_series(x, kmu, k1);
        } else {
            steed_fraction(x, kmu, k1);
            log_scale = -x;
        }
        const double xi2 = 2.0 / x;
        for (int i = 1; i <= whole_; ++i) {
            const double next = (mu_ + i) * xi2 * k1 + kmu;
            kmu = k1;
            k1 = next;
            if (k1 > 1e280) {
                kmu /= k1;
                log_scale += std::log(k1);
                k1 = 1.0;
            }
        }
        return std::log(kmu) + log_scale;
    }

    double operator()(double x) const { return std::exp(log_value(x)); }

private:
    void temme_series(double x, double& kmu, double& k1) const {
        const double x2 = 0.5 * x;
        const double pimu = std::numbers::pi * mu_;
        const double fact = std::abs(pimu) < detail::kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu_ * d;
        const double fact2 = std::abs(e) < detail::kEps ? 1.0 : std::sinh(e) / e;
        double ff = fact * (gam1_ * std::cosh(e) + gam2_ * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl_;
        double q = 0.5 / (e * gammi_);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        const double mu2 = mu_ * mu_;
        for (int i = 1; i < 10000; ++i) {
            ff = (i * ff + p + q) / (i * i - mu2);
            c *= d / i;
            p /= (i - mu_);
            q /= (i + mu_);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * detail::kEps) break;
        }
        kmu = sum;
        k1 = sum1 * 2.0 / x;
    }

    // Returns exp(x) K_mu(x) and exp(x) K_{mu+1}(x).
    void steed_fraction(double x, double& kmu, double& k1) const {
        const double mu2 = mu_ * mu_;
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d;
        double delh = d;
        double q1 = 0.0;
        double q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1;
        double c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        for (int i = 2; i < 100000; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < detail::kEps) break;
        }
        h = a1 * h;
        kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
        k1 = kmu * (mu_ + x + 0.5 - h) / x;
    }

    double nu_;
    int whole_;
    double mu_;
    double gam1_, gam2_, gampl_, gammi_;
};

inline double bessel_k(double nu, double x) { return BesselK(nu)(x); }

// ---------------------------------------------------------------------------
// Regularized incomplete gamma

namespace detail {

// log of x^a e^{-x} / Gamma(a)
inline double gamma_log_prefactor(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 100000; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(gamma_log_prefactor(a, x));
}

inline double gamma_q_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(gamma_log_prefactor(a, x)) * h;
}

inline void check_gamma_args(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("incomplete gamma: shape must be positive");
    if (!(x >= 0.0)) throw DomainError("incomplete gamma: argument must be non-negative");
}

}  // namespace detail

/// Lower regularized incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    detail::check_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    detail::check_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

namespace detail {

// Solves P(a, x) = p (or Q(a, x) = q when `upper`), Halley steps safeguarded by
// a bisection bracket.
inline double gamma_inverse(double a, double target, bool upper) {
    const double p = upper ? 1.0 - target : target;
    const double gln = std::lgamma(a);
    const double a1 = a - 1.0;
    double x;
    if (a > 1.0) {
        // target <= 0.5 on entry, so it is the smaller tail probability.
        const double pp = target;
        const double t = std::sqrt(-2.0 * std::log(pp));
        double z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if (p < 0.5) z = -z;
        x = std::max(1e-3, a * std::pow(1.0 - 1.0 / (9.0 * a) - z / (3.0 * std::sqrt(a)), 3));
    } else {
        const double t = 1.0 - a * (0.253 + a * 0.12);
        if (p < t) {
            x = std::pow(p / t, 1.0 / a);
        } else {
            const double tail = upper ? target / (1.0 - t) : (1.0 - p) / (1.0 - t);
            x = 1.0 - std::log(tail);
        }
    }
    if (!(x > 0.0) || !std::isfinite(x)) x = std::max(a, 1.0);

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        // err > 0 means x is too large.
        const double err = upper ? target - gamma_q(a, x) : gamma_p(a, x) - target;
        if (err == 0.0) return x;
        if (err > 0.0) hi = std::min(hi, x);
        else lo = std::max(lo, x);
        const double density = std::exp(a1 * std::log(x) - x - gln);
        double next;
        if (density > 0.0 && std::isfinite(density)) {
            const double u = err / density;
            const double step = u / (1.0 - 0.5 * std::min(1.0, u * (a1 / x - 1.0)));
            next = x - step;
        } else {
            next = std::numeric_limits<double>::quiet_NaN();
        }
        if (!(next > lo && next < hi) || !std::isfinite(next)) {
            if (hi - lo <= 4.0 * kEps * hi) return x;
            next = std::isinf(hi) ? std::max(2.0 * x, x + 1.0) : (lo > 0.0 ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * hi);
        }
        if (std::abs(next - x) <= 4.0 * kEps * std::abs(next)) return next;
        x = next;
    }
    return x;
}

}  // namespace detail

/// x such that P(a, x) = p.
inline double gamma_p_inv(double a, double p) {
    if (!(a > 0.0)) throw DomainError("gamma_p_inv: shape must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("gamma_p_inv: probability outside [0,1]");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    if (p > 0.5) return detail::gamma_inverse(a, 1.0 - p, true);
    return detail::gamma_inverse(a, p, false);
}

/// x such that Q(a, x) = q. More accurate than gamma_p_inv(a, 1-q) for small q.
inline double gamma_q_inv(double a, double q) {
    if (!(a > 0.0)) throw DomainError("gamma_q_inv: shape must be positive");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("gamma_q_inv: probability outside [0,1]");
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    if (q == 1.0) return 0.0;
    if (q > 0.5) return detail::gamma_inverse(a, 1.0 - q, false);
    return detail::gamma_inverse(a, q, true);
}

// ---------------------------------------------------------------------------
// Standard normal

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Phi^{-1}(p): Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("normal_quantile: probability outside [0,1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    if (p > 0.5) return -normal_quantile(1.0 - p);

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_SPECIAL_HPP
