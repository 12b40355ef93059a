#ifndef MIXWHITTLE_LINALG_HPP
#define MIXWHITTLE_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mixwhittle/error.hpp"

namespace mixwhittle {

/// Covariance matrix of the process at the given (sorted, distinct) time
/// indices, filled from an autocovariance sequence indexed by lag.
inline Eigen::MatrixXd covariance_matrix(std::span<const double> acv_seq, std::span<const std::size_t> times) {
    const auto m = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd c(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t ti = times[static_cast<std::size_t>(i)];
        c(i, i) = acv_seq[0];
        for (Eigen::Index j = 0; j < i; ++j) {
            const std::size_t tj = times[static_cast<std::size_t>(j)];
            const std::size_t lag = ti > tj ? ti - tj : tj - ti;
            if (lag >= acv_seq.size()) throw LengthError("autocovariance sequence shorter than the largest lag");
            c(i, j) = c(j, i) = acv_seq[lag];
        }
    }
    return c;
}

/// Lower Cholesky factor, optionally retrying with diagonal jitter.
struct Cholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    int escalations = 0;

    double log_det() const {
        const auto& l = llt.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
        return 2.0 * s;
    }
};

/// Factorizes C. On failure adds jitter_scale to the diagonal and retries,
/// at most max_escalations times (the jitter is cumulative).
inline Cholesky factorize(Eigen::MatrixXd c, double jitter_scale = 0.0, int max_escalations = 0) {
    Cholesky out;
    for (;;) {
        out.llt.compute(c);
        if (out.llt.info() == Eigen::Success) {
            bool finite = true;
            const auto& l = out.llt.matrixLLT();
            for (Eigen::Index i = 0; i < l.rows() && finite; ++i) finite = l(i, i) > 0.0 && std::isfinite(l(i, i));
            if (finite) return out;
        }
        if (out.escalations >= max_escalations || !(jitter_scale > 0.0))
            throw NumericalError("covariance matrix is not positive definite");
        c.diagonal().array() += jitter_scale;
        ++out.escalations;
    }
}

/// Cholesky factorization that reuses one buffer across calls; used inside
/// optimizer loops where a fresh n x n allocation per evaluation dominates.
class CholeskyWorkspace {
public:
    /// Fills the lower triangle from the autocovariance at the given times
    /// and factorizes in place. Returns false when not positive definite.
    bool factorize(std::span<const double> acv_seq, std::span<const std::size_t> times) {
        const auto m = static_cast<Eigen::Index>(times.size());
        if (a_.rows() != m) a_.resize(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const std::size_t tj = times[static_cast<std::size_t>(j)];
            for (Eigen::Index i = j; i < m; ++i) {
                const std::size_t lag = times[static_cast<std::size_t>(i)] - tj;
                if (lag >= acv_seq.size()) throw LengthError("autocovariance sequence shorter than the largest lag");
                a_(i, j) = acv_seq[lag];
            }
        }
        Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(a_);
        if (llt.info() != Eigen::Success) return false;
        log_det_ = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double d = a_(i, i);
            if (!(d > 0.0) || !std::isfinite(d)) return false;
            log_det_ += 2.0 * std::log(d);
        }
        return true;
    }

    double log_det() const noexcept { return log_det_; }
    auto lower() const { return a_.triangularView<Eigen::Lower>(); }

private:
    Eigen::MatrixXd a_;
    double log_det_ = 0.0;
};

/// Least squares solution of A b = y by column-pivoted QR. Rank deficiency is
/// reported with the column indices QR could not resolve.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    if (a.rows() < a.cols()) throw SingularError("fewer observations than regression coefficients", {});
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < a.cols()) {
        std::vector<std::size_t> dependent;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < a.cols(); ++k) dependent.push_back(static_cast<std::size_t>(perm(k)));
        std::string names;
        for (auto d : dependent) names += (names.empty() ? "" : ", ") + std::to_string(d);
        throw SingularError("design matrix is rank deficient; dependent columns: " + names, dependent);
    }
    return qr.solve(y);
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_LINALG_HPP
