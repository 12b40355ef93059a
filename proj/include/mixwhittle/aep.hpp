#ifndef MIXWHITTLE_AEP_HPP
#define MIXWHITTLE_AEP_HPP

// Asymmetric exponential power distribution, Gaussian-copula simulation and
// likelihood.
//
// Left of the mode mu the density is an exponential power curve with tail
// exponent p1 and scale 2 s* sigma; right of it, exponent p2 and scale
// 2 (1 - s*) sigma. The cdf at mu equals the skewness parameter s.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mixwhittle/covariance.hpp"
#include "mixwhittle/error.hpp"
#include "mixwhittle/gaussian_process.hpp"
#include "mixwhittle/linalg.hpp"
#include "mixwhittle/optimize.hpp"
#include "mixwhittle/spectral.hpp"
#include "mixwhittle/special.hpp"

namespace mixwhittle {

/// K_EP(p) = [2 p^(1/p) Gamma(1 + 1/p)]^-1, in log form.
inline double aep_log_kep(double p) { return -(std::numbers::ln2 + std::log(p) / p + std::lgamma(1.0 + 1.0 / p)); }

struct AepParams {
    double mu = 0.0;
    double sigma = 1.0;
    double varsigma = 0.5;
    double p1 = 2.0;
    double p2 = 2.0;

    void validate() const {
        auto bad = [](const char* name, double v) {
            throw DomainError(std::string("AEP parameter ") + name + " out of domain: " + std::to_string(v));
        };
        if (!std::isfinite(mu)) bad("mu", mu);
        if (!(sigma > 0.0) || !std::isfinite(sigma)) bad("sigma", sigma);
        if (!(varsigma > 0.0 && varsigma < 1.0)) bad("varsigma", varsigma);
        if (!(p1 > 0.0) || !std::isfinite(p1)) bad("p1", p1);
        if (!(p2 > 0.0) || !std::isfinite(p2)) bad("p2", p2);
    }

    double varsigma_star() const {
        const double k1 = std::exp(aep_log_kep(p1)), k2 = std::exp(aep_log_kep(p2));
        return varsigma * k1 / (varsigma * k1 + (1.0 - varsigma) * k2);
    }
};

/// Evaluator with the derived constants cached.
class AepDistribution {
public:
    explicit AepDistribution(const AepParams& p) : p_(p) {
        p_.validate();
        star_ = p_.varsigma_star();
        scale_left_ = 2.0 * star_ * p_.sigma;
        scale_right_ = 2.0 * (1.0 - star_) * p_.sigma;
        log_norm_left_ = std::log(p_.varsigma / (star_ * p_.sigma)) + aep_log_kep(p_.p1);
        log_norm_right_ = std::log((1.0 - p_.varsigma) / ((1.0 - star_) * p_.sigma)) + aep_log_kep(p_.p2);
    }

    const AepParams& params() const noexcept { return p_; }
    double varsigma_star() const noexcept { return star_; }

    double log_pdf(double z) const {
        if (z <= p_.mu) return log_norm_left_ - std::pow(std::abs(z - p_.mu) / scale_left_, p_.p1) / p_.p1;
        return log_norm_right_ - std::pow((z - p_.mu) / scale_right_, p_.p2) / p_.p2;
    }

    double pdf(double z) const { return std::exp(log_pdf(z)); }

    double cdf(double z) const {
        if (std::isnan(z)) throw DomainError("AEP cdf of NaN");
        if (z <= p_.mu) return p_.varsigma * gamma_q(1.0 / p_.p1, left_arg(z));
        return p_.varsigma + (1.0 - p_.varsigma) * gamma_p(1.0 / p_.p2, right_arg(z));
    }

    /// 1 - F(z), accurate in the right tail.
    double survival(double z) const {
        if (std::isnan(z)) throw DomainError("AEP survival of NaN");
        if (z <= p_.mu) return 1.0 - p_.varsigma * gamma_q(1.0 / p_.p1, left_arg(z));
        return (1.0 - p_.varsigma) * gamma_q(1.0 / p_.p2, right_arg(z));
    }

    double quantile(double prob) const {
        if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("AEP quantile: probability outside [0, 1]");
        if (prob <= p_.varsigma) return left_quantile(prob / p_.varsigma);
        return right_quantile((1.0 - prob) / (1.0 - p_.varsigma));
    }

    /// F^-1(1 - q), accurate for small q.
    double quantile_survival(double q) const {
        if (!(q >= 0.0 && q <= 1.0)) throw DomainError("AEP quantile: probability outside [0, 1]");
        if (q < 1.0 - p_.varsigma) return right_quantile(q / (1.0 - p_.varsigma));
        return left_quantile((1.0 - q) / p_.varsigma);
    }

    /// F^-1(Phi(z)), evaluated through whichever tail keeps precision.
    double from_normal(double z) const {
        return z <= 0.0 ? quantile(normal_cdf(z)) : quantile_survival(normal_cdf(-z));
    }

    /// Phi^-1(F(r)) with F clamped to [clamp, 1 - clamp]; `clamped` is set
    /// when the clamp was active.
    double normal_score(double r, double clamp, bool& clamped) const {
        clamped = false;
        if (r <= p_.mu) {
            double u = p_.varsigma * gamma_q(1.0 / p_.p1, left_arg(r));
            if (u < clamp) {
                u = clamp;
                clamped = true;
            }
            return normal_quantile(u);
        }
        double s = (1.0 - p_.varsigma) * gamma_q(1.0 / p_.p2, right_arg(r));
        if (s < clamp) {
            s = clamp;
            clamped = true;
        }
        return -normal_quantile(s);
    }

private:
    double left_arg(double z) const { return std::pow((p_.mu - z) / scale_left_, p_.p1) / p_.p1; }
    double right_arg(double z) const { return std::pow((z - p_.mu) / scale_right_, p_.p2) / p_.p2; }

    // tail = P(Z <= z) / s on the left branch.
    double left_quantile(double tail) const {
        if (tail <= 0.0) return -std::numeric_limits<double>::infinity();
        const double y = gamma_q_inv(1.0 / p_.p1, std::min(tail, 1.0));
        return p_.mu - scale_left_ * std::pow(p_.p1 * y, 1.0 / p_.p1);
    }
    // tail = P(Z > z) / (1 - s) on the right branch.
    double right_quantile(double tail) const {
        if (tail <= 0.0) return std::numeric_limits<double>::infinity();
        const double y = gamma_q_inv(1.0 / p_.p2, std::min(tail, 1.0));
        return p_.mu + scale_right_ * std::pow(p_.p2 * y, 1.0 / p_.p2);
    }

    AepParams p_;
    double star_ = 0.5, scale_left_ = 1.0, scale_right_ = 1.0, log_norm_left_ = 0.0, log_norm_right_ = 0.0;
};

inline double aep_pdf(double z, const AepParams& p) { return AepDistribution(p).pdf(z); }
inline double aep_cdf(double z, const AepParams& p) { return AepDistribution(p).cdf(z); }
inline double aep_quantile(double prob, const AepParams& p) { return AepDistribution(p).quantile(prob); }

/// Gaussian-copula AEP errors: a Gaussian draw with covariance `cov` (whose
/// total variance must be 1) pushed through F^-1(Phi(.)).
inline std::vector<double> simulate_aep_errors(const CovarianceSpec& cov, const AepParams& params, std::size_t n,
                                               std::uint64_t seed) {
    if (std::abs(cov.total_variance() - 1.0) > 1e-12)
        throw SpecError("AEP errors need a latent Gaussian with unit total variance (c0 + c1 = 1)");
    const AepDistribution dist(params);
    auto eps = simulate_gaussian_process(cov, n, seed);
    for (auto& e : eps) e = dist.from_normal(e);
    return eps;
}

inline constexpr double kAepClamp = 1e-15;

struct AepNll {
    double value = std::numeric_limits<double>::infinity();
    std::size_t clamped = 0;
};

/// Negative copula log-likelihood over observed times:
///   0.5 log|C| - 0.5 a'a + 0.5 a' C^-1 a - sum log f(r),
/// with a = Phi^-1(F(r)) and r the observed residuals.
inline AepNll aep_nll(const ObservedSeries& series, const Eigen::MatrixXd& design, const CovarianceSpec& alpha,
                      const Eigen::VectorXd& beta, const AepParams& theta) {
    series.validate();
    const std::size_t n = series.size();
    if (static_cast<std::size_t>(design.rows()) != n || design.cols() != beta.size())
        throw LengthError("design matrix dimensions do not match series and coefficients");
    const AepDistribution dist(theta);
    const auto idx = series.observed_indices();
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd a(k);
    AepNll out;
    double log_f = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto t = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]);
        const double r = series.values[static_cast<std::size_t>(t)] - design.row(t).dot(beta);
        bool clamped = false;
        a(i) = dist.normal_score(r, kAepClamp, clamped);
        out.clamped += clamped ? 1 : 0;
        log_f += dist.log_pdf(r);
    }
    const auto c = acv_sequence(alpha, n);
    const auto chol = factorize(covariance_matrix(c, idx));
    const Eigen::VectorXd w = chol.llt.matrixL().solve(a);
    out.value = 0.5 * chol.log_det() - 0.5 * a.squaredNorm() + 0.5 * w.squaredNorm() - log_f;
    return out;
}

struct AepMarginalFit {
    AepParams params;
    double nll = 0.0;        // at the fitted parameters
    double start_nll = 0.0;  // at the moment-based starting point
    OptimReport report;
};

/// iid AEP maximum likelihood over (mu, sigma, s, p1, p2). Starts at the
/// Gaussian member matching the sample mean and standard deviation.
inline AepMarginalFit fit_aep_marginal(std::span<const double> residuals, OptimConfig cfg = {}) {
    if (residuals.size() < 50) throw LengthError("AEP marginal fit needs at least 50 residuals");
    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= double(residuals.size());
    double var = 0.0;
    for (double r : residuals) var += (r - mean) * (r - mean);
    var /= double(residuals.size() - 1);
    if (!(var > 0.0)) throw DomainError("AEP marginal fit: residuals have zero variance");

    auto unpack = [](const Eigen::VectorXd& u) {
        AepParams p;
        p.mu = u(0);
        p.sigma = std::exp(u(1));
        p.varsigma = 1.0 / (1.0 + std::exp(-u(2)));
        p.p1 = std::exp(u(3));
        p.p2 = std::exp(u(4));
        return p;
    };
    auto nll = [&](const Eigen::VectorXd& u) {
        const AepParams p = unpack(u);
        if (!(p.varsigma > 0.0 && p.varsigma < 1.0) || p.p1 > 100.0 || p.p2 > 100.0 || p.p1 < 0.05 || p.p2 < 0.05)
            return std::numeric_limits<double>::infinity();
        const AepDistribution d(p);
        double s = 0.0;
        for (double r : residuals) s -= d.log_pdf(r);
        return s;
    };
    Eigen::VectorXd u0(5);
    u0 << mean, 0.5 * std::log(var), 0.0, std::log(2.0), std::log(2.0);
    AepMarginalFit out;
    out.start_nll = nll(u0);
    const auto res = minimize(nll, u0, cfg);
    out.params = unpack(res.x);
    out.nll = res.value;
    out.report = res.report;
    return out;
}

/// Autocovariance of F^-1(Phi(Z_t)) when Z is a unit-variance Gaussian
/// series with autocorrelation rho. Uses the Hermite expansion
/// cov = sum_k a_k^2 rho^k with a_k = E[h(Z) He_k(Z)] / sqrt(k!); lag zero
/// is the variance computed directly.
class AepTransformedAcv {
public:
    explicit AepTransformedAcv(const AepParams& params, std::size_t terms = 200, double half_width = 12.0,
                               std::size_t grid = 48001) {
        const AepDistribution dist(params);
        const double h = 2.0 * half_width / double(grid - 1);
        std::vector<double> z(grid), weight(grid), hz(grid);
        for (std::size_t i = 0; i < grid; ++i) {
            z[i] = -half_width + h * double(i);
            weight[i] = h * normal_pdf(z[i]) * ((i == 0 || i + 1 == grid) ? 0.5 : 1.0);
            hz[i] = dist.from_normal(z[i]);
        }
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < grid; ++i) {
            m1 += weight[i] * hz[i];
            m2 += weight[i] * hz[i] * hz[i];
        }
        mean_ = m1;
        variance_ = m2 - m1 * m1;
        coef_sq_.assign(terms + 1, 0.0);
        std::vector<double> prev(grid, 1.0), cur(z);
        for (std::size_t k = 1; k <= terms; ++k) {
            double a = 0.0;
            for (std::size_t i = 0; i < grid; ++i) a += weight[i] * hz[i] * cur[i];
            coef_sq_[k] = a * a;
            const double sk = std::sqrt(double(k)), sk1 = std::sqrt(double(k + 1));
            for (std::size_t i = 0; i < grid; ++i) {
                const double next = (z[i] * cur[i] - sk * prev[i]) / sk1;
                prev[i] = cur[i];
                cur[i] = next;
            }
        }
    }

    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }

    double covariance(double rho) const {
        if (rho >= 1.0) return variance_;
        double s = 0.0, pw = 1.0;
        for (std::size_t k = 1; k < coef_sq_.size(); ++k) {
            pw *= rho;
            s += coef_sq_[k] * pw;
        }
        return s;
    }

    /// Autocovariance at lags 0..n-1 for a latent covariance with unit total variance.
    std::vector<double> sequence(const CovarianceSpec& latent, std::size_t n) const {
        const auto rho = acv_sequence(latent, n);
        std::vector<double> out(n);
        out[0] = variance_;
        for (std::size_t t = 1; t < n; ++t) out[t] = covariance(rho[t] / rho[0]);
        return out;
    }

private:
    double mean_ = 0.0, variance_ = 0.0;
    std::vector<double> coef_sq_;
};

}  // namespace mixwhittle

#endif  // MIXWHITTLE_AEP_HPP
