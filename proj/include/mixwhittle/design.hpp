#ifndef MIXWHITTLE_DESIGN_HPP
#define MIXWHITTLE_DESIGN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixwhittle/error.hpp"

namespace mixwhittle {

/// Gamma-shaped impulse response parameters: weight at lag tau is
/// proportional to (tau+1)^(shape-1) exp(-rate (tau+1)).
struct IrfParams {
    double shape = 1.0;
    double rate = 0.1;

    void validate() const {
        if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("IRF shape must be positive");
        if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("IRF rate must be positive");
    }
};

inline constexpr std::size_t kDefaultIrfWindow = 120;

enum class ComponentKind { Intercept, LinearTrend, SeasonalPair, CyclicSplines, IrfCovariate };

struct DesignComponent {
    ComponentKind kind = ComponentKind::Intercept;
    double period = 12.0;                  // SeasonalPair
    std::size_t count = 4;                 // CyclicSplines
    std::size_t irf_window = kDefaultIrfWindow;  // IrfCovariate

    static DesignComponent intercept() { return {ComponentKind::Intercept}; }
    static DesignComponent linear_trend() { return {ComponentKind::LinearTrend}; }
    static DesignComponent seasonal(double period) {
        DesignComponent c{ComponentKind::SeasonalPair};
        c.period = period;
        return c;
    }
    static DesignComponent splines(std::size_t k) {
        DesignComponent c{ComponentKind::CyclicSplines};
        c.count = k;
        return c;
    }
    static DesignComponent irf(std::size_t window = kDefaultIrfWindow) {
        DesignComponent c{ComponentKind::IrfCovariate};
        c.irf_window = window;
        return c;
    }

    std::size_t columns() const noexcept {
        switch (kind) {
            case ComponentKind::SeasonalPair: return 2;
            case ComponentKind::CyclicSplines: return count;
            default: return 1;
        }
    }
};

struct DesignSpec {
    std::vector<DesignComponent> components;

    std::size_t column_count() const {
        std::size_t m = 0;
        for (const auto& c : components) m += c.columns();
        return m;
    }

    const DesignComponent* irf() const {
        for (const auto& c : components)
            if (c.kind == ComponentKind::IrfCovariate) return &c;
        return nullptr;
    }

    bool has_irf() const { return irf() != nullptr; }

    void validate() const {
        if (components.empty()) throw SpecError("design has no components");
        bool intercept = false, splines = false;
        int irfs = 0;
        for (const auto& c : components) {
            switch (c.kind) {
                case ComponentKind::Intercept: intercept = true; break;
                case ComponentKind::CyclicSplines:
                    splines = true;
                    if (c.count < 3) throw DomainError("cyclic splines need at least 3 basis functions");
                    break;
                case ComponentKind::SeasonalPair:
                    if (!(c.period > 0.0)) throw DomainError("seasonal period must be positive");
                    break;
                case ComponentKind::IrfCovariate:
                    ++irfs;
                    if (c.irf_window < 1) throw DomainError("IRF window must be at least 1");
                    break;
                case ComponentKind::LinearTrend: break;
            }
        }
        if (intercept && splines) throw SpecError("intercept and cyclic splines are mutually exclusive");
        if (irfs > 1) throw SpecError("at most one IRF covariate is supported");
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& c : components) {
            switch (c.kind) {
                case ComponentKind::Intercept: out.emplace_back("intercept"); break;
                case ComponentKind::LinearTrend: out.emplace_back("trend"); break;
                case ComponentKind::SeasonalPair: {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%g", c.period);
                    out.emplace_back(std::string("sin_") + buf);
                    out.emplace_back(std::string("cos_") + buf);
                    break;
                }
                case ComponentKind::CyclicSplines:
                    for (std::size_t k = 0; k < c.count; ++k) out.emplace_back("spline_" + std::to_string(k + 1));
                    break;
                case ComponentKind::IrfCovariate: out.emplace_back("irf"); break;
            }
        }
        return out;
    }
};

/// Exogenous driver. values[lead] is aligned with response time t = 1, so
/// `lead` entries of history precede the response.
struct ExogenousSeries {
    std::vector<double> values;
    std::size_t lead = 0;

    /// Number of response times (from t = 1) the series covers.
    std::size_t coverage() const { return values.size() > lead ? values.size() - lead : 0; }
};

struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// ---------------------------------------------------------------------------

/// Normalized IRF weights for lags 0..window-1. Evaluated in log space.
inline std::vector<double> irf_weights(const IrfParams& gamma, std::size_t window) {
    gamma.validate();
    if (window < 1) throw DomainError("IRF window must be at least 1");
    std::vector<double> w(window);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t tau = 0; tau < window; ++tau) {
        const double lag = static_cast<double>(tau + 1);
        w[tau] = (gamma.shape - 1.0) * std::log(lag) - gamma.rate * lag;
        top = std::max(top, w[tau]);
    }
    double total = 0.0;
    for (auto& v : w) {
        v = std::exp(v - top);
        total += v;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("IRF weights degenerate");
    for (auto& v : w) v /= total;
    return w;
}

/// m_t = sum_tau w_tau p(t - tau) for t = 1..rows.
inline std::vector<double> irf_column(const ExogenousSeries& exog, const IrfParams& gamma, std::size_t window,
                                      std::size_t rows) {
    if (exog.lead + 1 < window || exog.coverage() < rows) {
        const std::size_t need_lead = window - 1;
        throw LengthError("exogenous series too short: need " + std::to_string(need_lead) +
                          " values of history and coverage of " + std::to_string(rows) +
                          " response times (total length " + std::to_string(need_lead + rows) + "), got lead " +
                          std::to_string(exog.lead) + " and length " + std::to_string(exog.values.size()));
    }
    const auto w = irf_weights(gamma, window);
    std::vector<double> col(rows, 0.0);
    for (std::size_t t = 0; t < rows; ++t) {
        const std::size_t at = exog.lead + t;
        double acc = 0.0;
        for (std::size_t tau = 0; tau < window; ++tau) acc += w[tau] * exog.values[at - tau];
        col[t] = acc;
    }
    return col;
}

/// Cyclic cubic regression spline basis with `count` evenly spaced knots on
/// [0, span), wrapping at span. Basis k is the cardinal spline taking value 1
/// at knot k and 0 at the others, so the basis sums to one everywhere.
class CyclicSplineBasis {
public:
    CyclicSplineBasis(std::size_t count, double span) : count_(count), span_(span) {
        if (count < 3) throw DomainError("cyclic spline basis needs at least 3 functions");
        if (!(span > 0.0)) throw DomainError("cyclic spline span must be positive");
        h_ = span / static_cast<double>(count);
        const auto k = static_cast<Eigen::Index>(count);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::Index prev = (i + k - 1) % k;
            const Eigen::Index next = (i + 1) % k;
            d(i, prev) += h_ / 6.0;
            d(i, i) += 2.0 * h_ / 3.0;
            d(i, next) += h_ / 6.0;
            b(i, prev) += 1.0 / h_;
            b(i, i) -= 2.0 / h_;
            b(i, next) += 1.0 / h_;
        }
        curvature_ = d.partialPivLu().solve(b);
    }

    std::size_t size() const noexcept { return count_; }

    /// Values of all basis functions at x (taken modulo the span).
    Eigen::VectorXd evaluate(double x) const {
        double u = std::fmod(x, span_);
        if (u < 0) u += span_;
        auto i = static_cast<Eigen::Index>(std::floor(u / h_));
        const auto k = static_cast<Eigen::Index>(count_);
        if (i >= k) i = k - 1;
        const Eigen::Index j = (i + 1) % k;
        const double left = u - static_cast<double>(i) * h_;
        const double right = h_ - left;
        const double am = right / h_;
        const double ap = left / h_;
        const double cm = (right * right * right / h_ - h_ * right) / 6.0;
        const double cp = (left * left * left / h_ - h_ * left) / 6.0;
        Eigen::VectorXd out = cm * curvature_.row(i).transpose() + cp * curvature_.row(j).transpose();
        out(i) += am;
        out(j) += ap;
        return out;
    }

private:
    std::size_t count_;
    double span_;
    double h_;
    Eigen::MatrixXd curvature_;  // knot second derivatives per unit knot value
};

/// n x K matrix of the cyclic spline basis at t = 1..n with span n.
inline Eigen::MatrixXd cyclic_spline_basis(std::size_t n, std::size_t k) {
    if (k < 3) throw DomainError("cyclic spline basis needs K >= 3");
    if (n < k + 1) throw DomainError("cyclic spline basis needs n >= K + 1");
    const CyclicSplineBasis basis(k, static_cast<double>(n));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t t = 1; t <= n; ++t) out.row(static_cast<Eigen::Index>(t - 1)) = basis.evaluate(double(t)).transpose();
    return out;
}

/// Realizes a DesignSpec for a given number of rows. The gamma-independent
/// columns are built once; `matrix(gamma)` only recomputes the IRF column.
///
/// `n` is the fitting length that sets the trend scale (t/n) and the spline
/// span; `rows` may exceed it for forecasting.
class Design {
public:
    Design(DesignSpec spec, std::optional<ExogenousSeries> exog, std::size_t n, std::size_t rows = 0)
        : spec_(std::move(spec)), exog_(std::move(exog)), n_(n), rows_(rows == 0 ? n : rows) {
        spec_.validate();
        if (n_ < 1) throw LengthError("design needs at least one row");
        if (spec_.has_irf() && !exog_) throw SpecError("IRF covariate requested but no exogenous series given");
        if (!spec_.has_irf() && exog_) throw SpecError("exogenous series given but design has no IRF covariate");
        const auto m = static_cast<Eigen::Index>(spec_.column_count());
        const auto r = static_cast<Eigen::Index>(rows_);
        base_ = Eigen::MatrixXd::Zero(r, m);
        Eigen::Index col = 0;
        for (const auto& c : spec_.components) {
            switch (c.kind) {
                case ComponentKind::Intercept: base_.col(col++).setOnes(); break;
                case ComponentKind::LinearTrend:
                    for (Eigen::Index t = 0; t < r; ++t) base_(t, col) = double(t + 1) / double(n_);
                    ++col;
                    break;
                case ComponentKind::SeasonalPair:
                    for (Eigen::Index t = 0; t < r; ++t) {
                        const double arg = 2.0 * std::numbers::pi * double(t + 1) / c.period;
                        base_(t, col) = std::sin(arg);
                        base_(t, col + 1) = std::cos(arg);
                    }
                    col += 2;
                    break;
                case ComponentKind::CyclicSplines: {
                    if (c.count < 3 || n_ < c.count + 1) throw DomainError("cyclic splines need 3 <= K <= n - 1");
                    const CyclicSplineBasis basis(c.count, static_cast<double>(n_));
                    for (Eigen::Index t = 0; t < r; ++t)
                        base_.block(t, col, 1, static_cast<Eigen::Index>(c.count)) =
                            basis.evaluate(double(t + 1)).transpose();
                    col += static_cast<Eigen::Index>(c.count);
                    break;
                }
                case ComponentKind::IrfCovariate:
                    irf_col_ = col++;
                    irf_window_ = c.irf_window;
                    if (exog_->lead + 1 < irf_window_ || exog_->coverage() < rows_) {
                        // Surface the length error at construction.
                        (void)irf_column(*exog_, IrfParams{}, irf_window_, rows_);
                    }
                    break;
            }
        }
    }

    const DesignSpec& spec() const noexcept { return spec_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t columns() const noexcept { return static_cast<std::size_t>(base_.cols()); }
    bool has_irf() const noexcept { return irf_col_ >= 0; }
    std::size_t irf_window() const noexcept { return irf_window_; }
    Eigen::Index irf_column_index() const noexcept { return irf_col_; }
    const std::optional<ExogenousSeries>& exogenous() const noexcept { return exog_; }

    /// Design columns that do not depend on gamma (the IRF column is zero).
    const Eigen::MatrixXd& base() const noexcept { return base_; }

    Eigen::VectorXd irf(const IrfParams& gamma) const {
        const auto col = irf_column(*exog_, gamma, irf_window_, rows_);
        return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
    }

    Eigen::MatrixXd matrix(const std::optional<IrfParams>& gamma) const {
        Eigen::MatrixXd out = base_;
        if (has_irf()) {
            if (!gamma) throw SpecError("design has an IRF covariate; IRF parameters are required");
            out.col(irf_col_) = irf(*gamma);
        }
        return out;
    }

private:
    DesignSpec spec_;
    std::optional<ExogenousSeries> exog_;
    std::size_t n_;
    std::size_t rows_;
    Eigen::MatrixXd base_;
    Eigen::Index irf_col_ = -1;
    std::size_t irf_window_ = 0;
};

inline DesignMatrix build_design(const DesignSpec& spec, const std::optional<ExogenousSeries>& exog,
                                 const std::optional<IrfParams>& gamma, std::size_t n, std::size_t rows = 0) {
    const Design design(spec, exog, n, rows);
    return {design.matrix(gamma), spec.labels()};
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_DESIGN_HPP
