#ifndef MIXWHITTLE_ESTIMATE_HPP
#define MIXWHITTLE_ESTIMATE_HPP

// Estimators for the mixed model x = M_gamma beta + eps:
//   GaussianWhittle  debiased Whittle likelihood with missing-data modulation
//   GaussianExact    exact Gaussian likelihood, beta profiled by GLS
//   TwoStage         least squares for (beta, gamma), then Whittle for alpha
//   AepExact         exact Gaussian-copula likelihood with AEP marginals

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixwhittle/aep.hpp"
#include "mixwhittle/covariance.hpp"
#include "mixwhittle/design.hpp"
#include "mixwhittle/error.hpp"
#include "mixwhittle/fft.hpp"
#include "mixwhittle/linalg.hpp"
#include "mixwhittle/optimize.hpp"
#include "mixwhittle/spectral.hpp"

namespace mixwhittle {

enum class EstimationMethod { GaussianWhittle, GaussianExact, TwoStage, AepExact };

inline std::string_view to_string(EstimationMethod m) {
    switch (m) {
        case EstimationMethod::GaussianWhittle: return "whittle";
        case EstimationMethod::GaussianExact: return "ml";
        case EstimationMethod::TwoStage: return "two_stage";
        case EstimationMethod::AepExact: return "aep_ml";
    }
    return "unknown";
}

inline EstimationMethod estimation_method_from_string(std::string_view s) {
    if (s == "whittle") return EstimationMethod::GaussianWhittle;
    if (s == "ml") return EstimationMethod::GaussianExact;
    if (s == "two_stage") return EstimationMethod::TwoStage;
    if (s == "aep_ml") return EstimationMethod::AepExact;
    throw SpecError("unknown estimation method '" + std::string(s) + "'");
}

/// Covariance family plus optional fixed values; unset fields are estimated.
struct CovarianceModel {
    CovarianceFamily family = CovarianceFamily::Matern;
    double period = 12.0;
    std::optional<double> c0, c1, lambda_m, nu, lambda_p;
};

struct ModelSpec {
    DesignSpec design;
    CovarianceModel covariance;
    EstimationMethod method = EstimationMethod::GaussianWhittle;
    // Whittle only: solve for beta by frequency-domain GLS at each (alpha,
    // gamma) instead of searching over it.
    bool profile_whittle_beta = true;
    bool exclude_zero_frequency = false;
    IrfParams initial_gamma{1.0, 0.1};
};

struct ModelFit {
    EstimationMethod method = EstimationMethod::GaussianWhittle;
    CovarianceSpec alpha;
    Eigen::VectorXd beta;
    std::vector<std::string> beta_labels;
    std::optional<IrfParams> gamma;
    std::optional<AepParams> theta;
    double objective = 0.0;  // minimized negative (quasi-)log-likelihood
    OptimReport report;
    std::size_t clamped = 0;  // AEP probability clamps at the optimum
    std::size_t observed = 0;

    double log_likelihood() const { return -objective; }
};

// ---------------------------------------------------------------------------
// Parameter transforms

enum class ParameterKind { C0, C1, LambdaM, Nu, LambdaP, Shape, Rate, Beta, Sigma, Varsigma, P1, P2 };
enum class Transform { Log, Logit, Identity };

struct ParameterPoint {
    CovarianceSpec alpha;
    std::optional<IrfParams> gamma;
    Eigen::VectorXd beta;
    std::optional<AepParams> theta;
};

/// Maps between an unconstrained optimizer vector and model parameters.
/// Positive parameters use log, probabilities (AEP skewness, and the nugget
/// share when c0 + c1 is pinned to 1) use logit, coefficients identity.
class ParameterLayout {
public:
    struct Entry {
        ParameterKind kind;
        Transform transform;
        Eigen::Index index = 0;  // beta position
    };

    ParameterLayout(const CovarianceModel& cov, bool has_irf, std::size_t beta_count, bool include_beta,
                    bool aep = false)
        : cov_(cov), aep_(aep), beta_count_(beta_count) {
        const bool smooth = cov.family != CovarianceFamily::Exponential;
        const bool periodic = cov.family == CovarianceFamily::MaternPeriodic;
        if (aep) {
            if (!cov.c0) entries_.push_back({ParameterKind::C0, Transform::Logit});
        } else {
            if (!cov.c0) entries_.push_back({ParameterKind::C0, Transform::Log});
            if (!cov.c1) entries_.push_back({ParameterKind::C1, Transform::Log});
        }
        if (!cov.lambda_m) entries_.push_back({ParameterKind::LambdaM, Transform::Log});
        if (smooth && !cov.nu) entries_.push_back({ParameterKind::Nu, Transform::Log});
        if (periodic && !cov.lambda_p) entries_.push_back({ParameterKind::LambdaP, Transform::Log});
        if (has_irf) {
            entries_.push_back({ParameterKind::Shape, Transform::Log});
            entries_.push_back({ParameterKind::Rate, Transform::Log});
        }
        if (include_beta)
            for (std::size_t i = 0; i < beta_count; ++i)
                entries_.push_back({ParameterKind::Beta, Transform::Identity, static_cast<Eigen::Index>(i)});
        if (aep) {
            entries_.push_back({ParameterKind::Sigma, Transform::Log});
            entries_.push_back({ParameterKind::Varsigma, Transform::Logit});
            entries_.push_back({ParameterKind::P1, Transform::Log});
            entries_.push_back({ParameterKind::P2, Transform::Log});
        }
        has_irf_ = has_irf;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    static double forward(Transform t, double v) {
        switch (t) {
            case Transform::Log: return std::log(v);
            case Transform::Logit: return std::log(v) - std::log1p(-v);
            case Transform::Identity: return v;
        }
        return v;
    }

    static double inverse(Transform t, double u) {
        switch (t) {
            case Transform::Log: return std::exp(u);
            case Transform::Logit: return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
            case Transform::Identity: return u;
        }
        return u;
    }

    Eigen::VectorXd to_raw(const ParameterPoint& p) const {
        Eigen::VectorXd u(static_cast<Eigen::Index>(entries_.size()));
        for (std::size_t i = 0; i < entries_.size(); ++i) u(static_cast<Eigen::Index>(i)) = forward(entries_[i].transform, get(p, entries_[i]));
        return u;
    }

    /// Fixed values and `base` (for parameters the layout does not cover,
    /// such as a profiled beta) fill the rest of the point.
    ParameterPoint from_raw(const Eigen::VectorXd& u, const ParameterPoint& base) const {
        ParameterPoint p = base;
        p.alpha.family = cov_.family;
        p.alpha.period = cov_.period;
        if (cov_.c0) p.alpha.c0 = *cov_.c0;
        if (cov_.c1) p.alpha.c1 = *cov_.c1;
        if (cov_.lambda_m) p.alpha.lambda_m = *cov_.lambda_m;
        if (cov_.nu) p.alpha.nu = *cov_.nu;
        if (cov_.lambda_p) p.alpha.lambda_p = *cov_.lambda_p;
        if (has_irf_ && !p.gamma) p.gamma = IrfParams{};
        if (aep_ && !p.theta) p.theta = AepParams{};
        if (p.beta.size() != static_cast<Eigen::Index>(beta_count_)) p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(beta_count_));
        for (std::size_t i = 0; i < entries_.size(); ++i) set(p, entries_[i], inverse(entries_[i].transform, u(static_cast<Eigen::Index>(i))));
        if (aep_) p.alpha.c1 = 1.0 - p.alpha.c0;
        return p;
    }

    /// True when every coordinate is finite and the point lies in the model domain.
    bool admissible(const Eigen::VectorXd& u, const ParameterPoint& p) const {
        if (!u.allFinite()) return false;
        const auto& a = p.alpha;
        if (!(a.c0 >= 0.0 && a.c1 >= 0.0 && a.lambda_m > 0.0 && std::isfinite(a.lambda_m))) return false;
        if (a.family != CovarianceFamily::Exponential && !(a.nu > 0.0 && a.nu <= kMaxSmoothness)) return false;
        if (a.family == CovarianceFamily::MaternPeriodic && !(a.lambda_p > 0.0 && std::isfinite(a.lambda_p))) return false;
        if (p.gamma && !(p.gamma->shape > 0.0 && p.gamma->rate > 0.0 && std::isfinite(p.gamma->shape) &&
                         std::isfinite(p.gamma->rate)))
            return false;
        if (p.theta) {
            const auto& t = *p.theta;
            if (!(t.sigma > 0.0 && std::isfinite(t.sigma) && t.varsigma > 0.0 && t.varsigma < 1.0 && t.p1 > 0.0 &&
                  t.p2 > 0.0 && std::isfinite(t.p1) && std::isfinite(t.p2)))
                return false;
            if (aep_ && !(a.c0 < 1.0)) return false;
        }
        return true;
    }

private:
    static double get(const ParameterPoint& p, const Entry& e) {
        switch (e.kind) {
            case ParameterKind::C0: return p.alpha.c0;
            case ParameterKind::C1: return p.alpha.c1;
            case ParameterKind::LambdaM: return p.alpha.lambda_m;
            case ParameterKind::Nu: return p.alpha.nu;
            case ParameterKind::LambdaP: return p.alpha.lambda_p;
            case ParameterKind::Shape: return p.gamma->shape;
            case ParameterKind::Rate: return p.gamma->rate;
            case ParameterKind::Beta: return p.beta(e.index);
            case ParameterKind::Sigma: return p.theta->sigma;
            case ParameterKind::Varsigma: return p.theta->varsigma;
            case ParameterKind::P1: return p.theta->p1;
            case ParameterKind::P2: return p.theta->p2;
        }
        return 0.0;
    }

    static void set(ParameterPoint& p, const Entry& e, double v) {
        switch (e.kind) {
            case ParameterKind::C0: p.alpha.c0 = v; break;
            case ParameterKind::C1: p.alpha.c1 = v; break;
            case ParameterKind::LambdaM: p.alpha.lambda_m = v; break;
            case ParameterKind::Nu: p.alpha.nu = v; break;
            case ParameterKind::LambdaP: p.alpha.lambda_p = v; break;
            case ParameterKind::Shape: p.gamma->shape = v; break;
            case ParameterKind::Rate: p.gamma->rate = v; break;
            case ParameterKind::Beta: p.beta(e.index) = v; break;
            case ParameterKind::Sigma: p.theta->sigma = v; break;
            case ParameterKind::Varsigma: p.theta->varsigma = v; break;
            case ParameterKind::P1: p.theta->p1 = v; break;
            case ParameterKind::P2: p.theta->p2 = v; break;
        }
    }

    CovarianceModel cov_;
    bool aep_ = false;
    bool has_irf_ = false;
    std::size_t beta_count_ = 0;
    std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Debiased Whittle likelihood

struct WhittleOptions {
    bool exclude_zero_frequency = false;
    SpectrumFloor floor{};
};

struct ObjectiveValue {
    double value = std::numeric_limits<double>::infinity();
    bool in_domain = false;
};

/// Holds the frequency-domain pieces that do not depend on the parameters:
/// the mask pair fractions and the DFTs of the modulated data and of the
/// gamma-independent design columns.
class WhittleProblem {
public:
    using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

    WhittleProblem(const ObservedSeries& series, Eigen::MatrixXd base, Eigen::Index irf_col,
                   std::optional<ExogenousSeries> exog, std::size_t irf_window, WhittleOptions opts = {})
        : n_(series.size()), half_(n_ / 2 + 1), opts_(opts), base_(std::move(base)), irf_col_(irf_col),
          exog_(std::move(exog)), irf_window_(irf_window) {
        series.validate();
        if (static_cast<std::size_t>(base_.rows()) != n_) throw LengthError("design rows differ from series length");
        mask_ = series.mask;
        pairs_ = mask_pair_fractions(mask_);
        data_ = transform(series.modulated());
        columns_ = ComplexMatrix(static_cast<Eigen::Index>(half_), base_.cols());
        for (Eigen::Index l = 0; l < base_.cols(); ++l) {
            if (l == irf_col_) continue;
            std::vector<double> col(n_);
            for (std::size_t t = 0; t < n_; ++t) col[t] = mask_[t] ? base_(static_cast<Eigen::Index>(t), l) : 0.0;
            columns_.col(l) = transform(col);
        }
        weights_.assign(half_, 2.0);
        weights_[0] = opts_.exclude_zero_frequency ? 0.0 : 1.0;
        if (n_ % 2 == 0) weights_[half_ - 1] = 1.0;
    }

    WhittleProblem(const ObservedSeries& series, const Design& design, WhittleOptions opts = {})
        : WhittleProblem(series, design.base(), design.irf_column_index(), design.exogenous(), design.irf_window(), opts) {}

    std::size_t size() const noexcept { return n_; }

    /// Expected periodogram of the modulated process (half spectrum).
    std::vector<double> expected(const CovarianceSpec& alpha) const {
        const auto f = expected_periodogram(modulated_acv(acv_sequence(alpha, n_), pairs_), opts_.floor);
        return {f.begin(), f.begin() + static_cast<long>(half_)};
    }

    /// Design column DFTs for the given gamma.
    ComplexMatrix columns(const std::optional<IrfParams>& gamma) const {
        if (irf_col_ < 0) return columns_;
        if (!gamma) throw SpecError("design has an IRF covariate; IRF parameters are required");
        ComplexMatrix a = columns_;
        auto col = irf_column(*exog_, *gamma, irf_window_, n_);
        for (std::size_t t = 0; t < n_; ++t)
            if (!mask_[t]) col[t] = 0.0;
        a.col(irf_col_) = transform(col);
        return a;
    }

    /// Sum over all n frequencies of log f + I / f.
    ObjectiveValue nll(const CovarianceSpec& alpha, const Eigen::VectorXd& beta,
                       const std::optional<IrfParams>& gamma) const {
        if (beta.size() != base_.cols()) throw LengthError("coefficient vector length differs from design columns");
        std::vector<double> f;
        try {
            f = expected(alpha);
        } catch (const DomainError&) {
            return {};
        } catch (const NumericalError&) {
            return {};
        }
        const auto a = columns(gamma);
        const Eigen::VectorXcd resid = data_ - a * beta.cast<std::complex<double>>();
        double s = 0.0;
        for (std::size_t k = 0; k < half_; ++k) {
            const double i_k = std::norm(resid(static_cast<Eigen::Index>(k))) / double(n_);
            s += weights_[k] * (std::log(f[k]) + i_k / f[k]);
        }
        return {s, true};
    }

    struct Profiled {
        ObjectiveValue objective;
        Eigen::VectorXd beta;
    };

    /// nll minimized over beta in closed form (weighted least squares in the
    /// frequency domain with weights 1 / f).
    Profiled profiled(const CovarianceSpec& alpha, const std::optional<IrfParams>& gamma) const {
        Profiled out;
        std::vector<double> f;
        try {
            f = expected(alpha);
        } catch (const DomainError&) {
            return out;
        } catch (const NumericalError&) {
            return out;
        }
        const auto a = columns(gamma);
        const auto m = a.cols();
        const auto rows = static_cast<Eigen::Index>(2 * half_);
        Eigen::MatrixXd r(rows, m);
        Eigen::VectorXd y(rows);
        double log_sum = 0.0;
        for (std::size_t k = 0; k < half_; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double s = std::sqrt(weights_[k] / (double(n_) * f[k]));
            r.row(2 * kk) = s * a.row(kk).real();
            r.row(2 * kk + 1) = s * a.row(kk).imag();
            y(2 * kk) = s * data_(kk).real();
            y(2 * kk + 1) = s * data_(kk).imag();
            log_sum += weights_[k] * std::log(f[k]);
        }
        out.beta = least_squares(r, y);
        out.objective = {log_sum + (y - r * out.beta).squaredNorm(), true};
        return out;
    }

private:
    Eigen::VectorXcd transform(const std::vector<double>& v) const {
        auto& fft = real_fft(n_);
        std::vector<std::complex<double>> spec(half_);
        fft.forward(v, spec);
        return Eigen::Map<const Eigen::VectorXcd>(spec.data(), static_cast<Eigen::Index>(half_));
    }

    std::size_t n_, half_;
    WhittleOptions opts_;
    Eigen::MatrixXd base_;
    Eigen::Index irf_col_;
    std::optional<ExogenousSeries> exog_;
    std::size_t irf_window_;
    std::vector<std::uint8_t> mask_;
    std::vector<double> pairs_;
    std::vector<double> weights_;
    Eigen::VectorXcd data_;
    ComplexMatrix columns_;
};

/// Debiased, modulated Whittle negative log-likelihood for a realized design.
/// Out-of-domain covariance parameters give {+inf, in_domain = false}.
inline ObjectiveValue whittle_nll(const ObservedSeries& series, const Eigen::MatrixXd& design,
                                  const CovarianceSpec& alpha, const Eigen::VectorXd& beta, WhittleOptions opts = {}) {
    if (design.cols() != beta.size()) throw LengthError("coefficient vector length differs from design columns");
    return WhittleProblem(series, design, -1, std::nullopt, 0, opts).nll(alpha, beta, std::nullopt);
}

// ---------------------------------------------------------------------------
// Exact Gaussian likelihood

namespace detail {
inline std::vector<double> covariance_parameters(const CovarianceSpec& a) {
    return {a.c0, a.c1, a.lambda_m, a.nu, a.lambda_p};
}

inline Cholesky observed_cholesky(const CovarianceSpec& alpha, std::size_t n, std::span<const std::size_t> idx) {
    try {
        return factorize(covariance_matrix(acv_sequence(alpha, n), idx));
    } catch (const NumericalError&) {
        throw NumericalError("covariance matrix over observed times is not positive definite",
                             covariance_parameters(alpha));
    }
}
}  // namespace detail

/// beta = (M' C^-1 M)^-1 M' C^-1 x by a Cholesky whitening and QR solve.
inline Eigen::VectorXd profile_beta(const Eigen::MatrixXd& m_obs, const Eigen::MatrixXd& c_obs,
                                    const Eigen::VectorXd& x_obs) {
    if (m_obs.rows() != c_obs.rows() || c_obs.rows() != c_obs.cols() || x_obs.size() != m_obs.rows())
        throw LengthError("profile_beta: dimension mismatch");
    const auto chol = factorize(c_obs);
    const Eigen::MatrixXd zm = chol.llt.matrixL().solve(m_obs);
    const Eigen::VectorXd zx = chol.llt.matrixL().solve(x_obs);
    return least_squares(zm, zx);
}

/// Gaussian negative log-likelihood over observed times (missing rows and
/// columns deleted), including the (k/2) log 2 pi constant.
inline double gaussian_nll(const ObservedSeries& series, const Eigen::MatrixXd& design, const CovarianceSpec& alpha,
                           const Eigen::VectorXd& beta) {
    if (series.mask.size() != series.size()) throw LengthError("mask length differs from value length");
    if (static_cast<std::size_t>(design.rows()) != series.size() || design.cols() != beta.size())
        throw LengthError("design matrix dimensions do not match series and coefficients");
    const auto idx = series.observed_indices();
    if (idx.empty()) throw LengthError("no observed values");
    const auto chol = detail::observed_cholesky(alpha, series.size(), idx);
    Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto t = static_cast<Eigen::Index>(idx[i]);
        r(static_cast<Eigen::Index>(i)) = series.values[idx[i]] - design.row(t).dot(beta);
    }
    const Eigen::VectorXd z = chol.llt.matrixL().solve(r);
    return 0.5 * chol.log_det() + 0.5 * z.squaredNorm() + 0.5 * double(idx.size()) * std::log(2.0 * std::numbers::pi);
}

/// Exact likelihood with the gamma-independent pieces restricted to the
/// observed rows once.
class ExactProblem {
public:
    ExactProblem(const ObservedSeries& series, const Design& design)
        : n_(series.size()), design_(&design), idx_(series.observed_indices()) {
        series.validate();
        const auto k = static_cast<Eigen::Index>(idx_.size());
        x_.resize(k);
        base_.resize(k, design.base().cols());
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto t = idx_[static_cast<std::size_t>(i)];
            x_(i) = series.values[t];
            base_.row(i) = design.base().row(static_cast<Eigen::Index>(t));
        }
    }

    const std::vector<std::size_t>& observed() const noexcept { return idx_; }
    const Eigen::VectorXd& x_obs() const noexcept { return x_; }

    Eigen::MatrixXd design_obs(const std::optional<IrfParams>& gamma) const {
        if (!design_->has_irf()) return base_;
        if (!gamma) throw SpecError("design has an IRF covariate; IRF parameters are required");
        Eigen::MatrixXd m = base_;
        const auto col = design_->irf(*gamma);
        for (std::size_t i = 0; i < idx_.size(); ++i)
            m(static_cast<Eigen::Index>(i), design_->irf_column_index()) = col(static_cast<Eigen::Index>(idx_[i]));
        return m;
    }

    struct Profiled {
        double value = std::numeric_limits<double>::infinity();
        Eigen::VectorXd beta;
    };

    Profiled profiled(const CovarianceSpec& alpha, const std::optional<IrfParams>& gamma) const {
        factor(alpha);
        const auto l = work_.lower();
        const Eigen::MatrixXd zm = l.solve(design_obs(gamma));
        const Eigen::VectorXd zx = l.solve(x_);
        Profiled out;
        out.beta = least_squares(zm, zx);
        out.value = 0.5 * work_.log_det() + 0.5 * (zx - zm * out.beta).squaredNorm() + constant();
        return out;
    }

    double nll(const CovarianceSpec& alpha, const Eigen::VectorXd& beta, const std::optional<IrfParams>& gamma) const {
        factor(alpha);
        const Eigen::VectorXd z = work_.lower().solve(x_ - design_obs(gamma) * beta);
        return 0.5 * work_.log_det() + 0.5 * z.squaredNorm() + constant();
    }

    AepNll aep(const CovarianceSpec& alpha, const Eigen::VectorXd& beta, const std::optional<IrfParams>& gamma,
               const AepParams& theta) const {
        const AepDistribution dist(theta);
        const Eigen::VectorXd r = x_ - design_obs(gamma) * beta;
        Eigen::VectorXd a(r.size());
        AepNll out;
        double log_f = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            bool clamped = false;
            a(i) = dist.normal_score(r(i), kAepClamp, clamped);
            out.clamped += clamped ? 1 : 0;
            log_f += dist.log_pdf(r(i));
        }
        factor(alpha);
        const Eigen::VectorXd w = work_.lower().solve(a);
        out.value = 0.5 * work_.log_det() - 0.5 * a.squaredNorm() + 0.5 * w.squaredNorm() - log_f;
        return out;
    }

private:
    void factor(const CovarianceSpec& alpha) const {
        if (!work_.factorize(acv_sequence(alpha, n_), idx_))
            throw NumericalError("covariance matrix over observed times is not positive definite",
                                 detail::covariance_parameters(alpha));
    }

    double constant() const { return 0.5 * double(idx_.size()) * std::log(2.0 * std::numbers::pi); }

    std::size_t n_;
    const Design* design_;
    std::vector<std::size_t> idx_;
    Eigen::VectorXd x_;
    Eigen::MatrixXd base_;
    mutable CholeskyWorkspace work_;  // one problem per thread
};

// ---------------------------------------------------------------------------
// Two-stage least squares and starting values

struct StageOneResult {
    Eigen::VectorXd beta;
    std::optional<IrfParams> gamma;
    double rss = 0.0;
    std::vector<double> residuals;  // zero at unobserved times
    OptimReport report;
};

/// Least squares over observed rows; with an IRF covariate, gamma is searched
/// (log scale) with beta solved at each step. The search minimizes
/// (k/2) log(RSS / k), which has the same minimizer as RSS but a scale-free
/// stopping rule.
inline StageOneResult stage_one(const ObservedSeries& series, const Design& design, const IrfParams& start,
                                const OptimConfig& cfg) {
    const ExactProblem rows(series, design);
    auto solve = [&](const std::optional<IrfParams>& g) {
        const Eigen::MatrixXd m = rows.design_obs(g);
        Eigen::VectorXd b = least_squares(m, rows.x_obs());
        return std::pair{b, (rows.x_obs() - m * b).squaredNorm()};
    };
    StageOneResult out;
    if (design.has_irf()) {
        auto rss = [&](const Eigen::VectorXd& u) {
            if (!u.allFinite()) return std::numeric_limits<double>::infinity();
            try {
                const double k = double(rows.observed().size());
                return 0.5 * k * std::log(solve(IrfParams{std::exp(u(0)), std::exp(u(1))}).second / k);
            } catch (const std::exception&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        // The RSS surface has several basins; refine from the best of the
        // configured start and a coarse log grid.
        Eigen::VectorXd u0(2), u(2);
        u0 << std::log(start.shape), std::log(start.rate);
        double best = rss(u0);
        for (double shape : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0})
            for (double rate : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
                u << std::log(shape), std::log(rate);
                if (const double v = rss(u); v < best) {
                    best = v;
                    u0 = u;
                }
            }
        const auto res = minimize(rss, u0, cfg);
        out.gamma = IrfParams{std::exp(res.x(0)), std::exp(res.x(1))};
        out.report = res.report;
    } else {
        out.report.converged = true;
    }
    auto [b, r] = solve(out.gamma);
    out.beta = b;
    out.rss = r;
    const Eigen::MatrixXd full = design.matrix(out.gamma);
    out.residuals.assign(series.size(), 0.0);
    for (std::size_t t = 0; t < series.size(); ++t)
        if (series.mask[t]) out.residuals[t] = series.values[t] - full.row(static_cast<Eigen::Index>(t)).dot(b);
    return out;
}

/// Masked empirical autocovariance: sum over observed pairs / number of pairs.
inline std::vector<double> empirical_acv(std::span<const double> values, std::span<const std::uint8_t> mask,
                                         std::size_t max_lag) {
    const std::size_t n = values.size();
    std::vector<double> out(std::min(max_lag + 1, n), 0.0);
    for (std::size_t tau = 0; tau < out.size(); ++tau) {
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t t = 0; t + tau < n; ++t)
            if (mask[t] && mask[t + tau]) {
                s += values[t] * values[t + tau];
                ++c;
            }
        out[tau] = c > 0 ? s / double(c) : 0.0;
    }
    return out;
}

/// Method-of-moments starting covariance from residuals: 5% nugget, 95%
/// partial sill, length-scale at the lag where the empirical ACV halves, nu=1.
inline CovarianceSpec moment_covariance(std::span<const double> residuals, std::span<const std::uint8_t> mask,
                                        const CovarianceModel& model) {
    const auto c = empirical_acv(residuals, mask, residuals.size() / 2);
    CovarianceSpec s;
    s.family = model.family;
    s.period = model.period;
    const double v = c[0] > 0.0 ? c[0] : 1.0;
    s.c0 = 0.05 * v;
    s.c1 = 0.95 * v;
    double half = 1.0;
    for (std::size_t tau = 1; tau < c.size(); ++tau)
        if (c[tau] <= 0.5 * c[0]) {
            half = double(tau);
            break;
        }
    s.lambda_m = half;
    s.nu = 1.0;
    s.lambda_p = 1.0;
    if (model.c0) s.c0 = *model.c0;
    if (model.c1) s.c1 = *model.c1;
    if (model.lambda_m) s.lambda_m = *model.lambda_m;
    if (model.nu) s.nu = *model.nu;
    if (model.lambda_p) s.lambda_p = *model.lambda_p;
    return s;
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

template <class Objective>
auto guarded(const ParameterLayout& layout, const ParameterPoint& base, Objective&& obj) {
    return [&layout, &base, obj](const Eigen::VectorXd& u) -> double {
        const auto p = layout.from_raw(u, base);
        if (!layout.admissible(u, p)) return std::numeric_limits<double>::infinity();
        try {
            return obj(p);
        } catch (const DomainError&) {
        } catch (const NumericalError&) {
        } catch (const SingularError&) {
        }
        return std::numeric_limits<double>::infinity();
    };
}

// With every parameter fixed there is nothing to search; evaluate once.
template <class F>
OptimResult minimize_or_evaluate(F& f, const Eigen::VectorXd& u0, const OptimConfig& cfg) {
    if (u0.size() > 0) return minimize(f, u0, cfg);
    OptimResult r;
    r.x = u0;
    r.value = f(u0);
    r.report.evaluations = 1;
    r.report.converged = std::isfinite(r.value);
    if (!r.report.converged) throw NumericalError("objective is not finite at the fixed parameters");
    return r;
}

inline void merge_report(OptimReport& into, const OptimReport& from) {
    into.iterations += from.iterations;
    into.evaluations += from.evaluations;
    into.rejected += from.rejected;
}

}  // namespace detail

inline ModelFit fit(const ObservedSeries& series, const std::optional<ExogenousSeries>& exog, const ModelSpec& spec,
                    const OptimConfig& cfg = {}) {
    series.validate();
    const Design design(spec.design, exog, series.size());
    const std::size_t m = design.columns();
    const bool aep = spec.method == EstimationMethod::AepExact;
    const bool beta_free = aep || (spec.method == EstimationMethod::GaussianWhittle && !spec.profile_whittle_beta);
    const bool alpha_only = spec.method == EstimationMethod::TwoStage;
    const ParameterLayout layout(spec.covariance, design.has_irf() && !alpha_only, m, beta_free, aep);
    const std::size_t observed = series.observed_count();
    std::size_t free_count = layout.size() + (beta_free ? 0 : m);
    if (alpha_only && design.has_irf()) free_count += 2;
    if (observed < free_count || observed < m)
        throw SpecError("too few observed values (" + std::to_string(observed) + ") for " +
                        std::to_string(free_count) + " free parameters");

    const auto s1 = stage_one(series, design, spec.initial_gamma, cfg);
    ParameterPoint start;
    start.alpha = moment_covariance(s1.residuals, series.mask, spec.covariance);
    start.gamma = s1.gamma;
    start.beta = s1.beta;
    if (aep) {
        if (!spec.covariance.c0) start.alpha.c0 = 0.05;
        start.alpha.c1 = 1.0 - start.alpha.c0;
        double var = 0.0;
        for (std::size_t t = 0; t < series.size(); ++t)
            if (series.mask[t]) var += s1.residuals[t] * s1.residuals[t];
        start.theta = AepParams{0.0, std::sqrt(var / double(observed)), 0.5, 2.0, 2.0};
    }

    ModelFit out;
    out.method = spec.method;
    out.beta_labels = design.spec().labels();
    out.observed = observed;
    const Eigen::VectorXd u0 = layout.to_raw(start);

    switch (spec.method) {
        case EstimationMethod::GaussianWhittle:
        case EstimationMethod::TwoStage: {
            const WhittleProblem problem(series, design, {spec.exclude_zero_frequency, {}});
            std::optional<ParameterPoint> best;
            if (spec.method == EstimationMethod::TwoStage || !spec.profile_whittle_beta) {
                auto f = detail::guarded(layout, start, [&](const ParameterPoint& p) {
                    return problem.nll(p.alpha, p.beta, p.gamma).value;
                });
                const auto res = detail::minimize_or_evaluate(f, u0, cfg);
                best = layout.from_raw(res.x, start);
                out.objective = res.value;
                out.report = res.report;
            } else {
                auto f = detail::guarded(layout, start, [&](const ParameterPoint& p) {
                    return problem.profiled(p.alpha, p.gamma).objective.value;
                });
                const auto res = detail::minimize_or_evaluate(f, u0, cfg);
                best = layout.from_raw(res.x, start);
                const auto prof = problem.profiled(best->alpha, best->gamma);
                best->beta = prof.beta;
                out.objective = prof.objective.value;
                out.report = res.report;
            }
            out.alpha = best->alpha;
            out.beta = best->beta;
            out.gamma = best->gamma;
            if (alpha_only) {
                detail::merge_report(out.report, s1.report);
                out.report.converged = out.report.converged && s1.report.converged;
            }
            break;
        }
        case EstimationMethod::GaussianExact: {
            const ExactProblem problem(series, design);
            auto f = detail::guarded(layout, start,
                                     [&](const ParameterPoint& p) { return problem.profiled(p.alpha, p.gamma).value; });
            const auto res = detail::minimize_or_evaluate(f, u0, cfg);
            const auto best = layout.from_raw(res.x, start);
            const auto prof = problem.profiled(best.alpha, best.gamma);
            out.alpha = best.alpha;
            out.beta = prof.beta;
            out.gamma = best.gamma;
            out.objective = prof.value;
            out.report = res.report;
            break;
        }
        case EstimationMethod::AepExact: {
            const ExactProblem problem(series, design);
            auto f = detail::guarded(layout, start, [&](const ParameterPoint& p) {
                return problem.aep(p.alpha, p.beta, p.gamma, *p.theta).value;
            });
            const auto res = detail::minimize_or_evaluate(f, u0, cfg);
            const auto best = layout.from_raw(res.x, start);
            const auto final_value = problem.aep(best.alpha, best.beta, best.gamma, *best.theta);
            out.alpha = best.alpha;
            out.beta = best.beta;
            out.gamma = best.gamma;
            out.theta = best.theta;
            out.objective = final_value.value;
            out.clamped = final_value.clamped;
            out.report = res.report;
            break;
        }
    }
    return out;
}

/// Fixed term M_gamma beta of a fit over `rows` time steps of a design with
/// fitting length n.
inline Eigen::VectorXd fixed_term(const ModelFit& fit, const DesignSpec& spec, const std::optional<ExogenousSeries>& exog,
                                  std::size_t n, std::size_t rows = 0) {
    const Design design(spec, exog, n, rows);
    return design.matrix(fit.gamma) * fit.beta;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_ESTIMATE_HPP
