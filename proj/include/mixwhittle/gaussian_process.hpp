#ifndef MIXWHITTLE_GAUSSIAN_PROCESS_HPP
#define MIXWHITTLE_GAUSSIAN_PROCESS_HPP

// Exact draws of a stationary Gaussian series by circulant embedding, with a
// dense Cholesky fallback when no embedding up to 8n is non-negative definite.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "mixwhittle/covariance.hpp"
#include "mixwhittle/fft.hpp"
#include "mixwhittle/linalg.hpp"

namespace mixwhittle {

class GaussianProcessSampler {
public:
    GaussianProcessSampler(const CovarianceSpec& spec, std::size_t n) : n_(n) {
        if (n == 0) throw LengthError("cannot simulate an empty series");
        spec.validate();
        if (n == 1) {
            scale_ = std::sqrt(spec.total_variance());
            return;
        }
        for (std::size_t m = 2 * (n - 1); m <= 8 * n; m *= 2) {
            const auto c = acv_sequence(spec, m / 2 + 1);
            std::vector<double> row(m);
            for (std::size_t k = 0; k < m; ++k) row[k] = c[std::min(k, m - k)];
            auto& fft = real_fft(m);
            std::vector<std::complex<double>> spec_half(fft.spectrum_size());
            fft.forward(row, spec_half);
            double top = 0.0, low = 0.0;
            for (const auto& v : spec_half) {
                top = std::max(top, v.real());
                low = std::min(low, v.real());
            }
            if (low >= -1e-9 * std::max(top, 1.0)) {
                embedding_ = m;
                sqrt_eig_.resize(m);
                for (std::size_t k = 0; k < m; ++k) {
                    const double lam = spec_half[std::min(k, m - k)].real();
                    sqrt_eig_[k] = std::sqrt(std::max(lam, 0.0) / double(m));
                }
                return;
            }
        }
        const auto c = acv_sequence(spec, n);
        std::vector<std::size_t> idx(n);
        for (std::size_t t = 0; t < n; ++t) idx[t] = t;
        auto chol = factorize(covariance_matrix(c, idx), 1e-10 * c[0], 3);
        dense_ = chol.llt.matrixL();
    }

    std::size_t size() const noexcept { return n_; }
    /// Embedding length, or 0 when the dense fallback is in use.
    std::size_t embedding_length() const noexcept { return embedding_; }

    template <class Rng>
    std::vector<double> draw(Rng& rng) const {
        std::normal_distribution<double> z;
        std::vector<double> out(n_);
        if (n_ == 1) {
            out[0] = scale_ * z(rng);
            return out;
        }
        if (embedding_ == 0) {
            Eigen::VectorXd w(static_cast<Eigen::Index>(n_));
            for (auto& v : w) v = z(rng);
            const Eigen::VectorXd x = dense_.triangularView<Eigen::Lower>() * w;
            for (std::size_t t = 0; t < n_; ++t) out[t] = x(static_cast<Eigen::Index>(t));
            return out;
        }
        std::vector<std::complex<double>> buf(embedding_);
        for (std::size_t k = 0; k < embedding_; ++k) {
            const double re = z(rng);
            const double im = z(rng);
            buf[k] = sqrt_eig_[k] * std::complex<double>(re, im);
        }
        complex_fft(embedding_, -1).transform(buf);
        for (std::size_t t = 0; t < n_; ++t) out[t] = buf[t].real();
        return out;
    }

private:
    std::size_t n_;
    std::size_t embedding_ = 0;
    double scale_ = 0.0;
    std::vector<double> sqrt_eig_;
    Eigen::MatrixXd dense_;
};

/// One draw of length n from the zero-mean stationary Gaussian law with the
/// given covariance.
inline std::vector<double> simulate_gaussian_process(const CovarianceSpec& spec, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return GaussianProcessSampler(spec, n).draw(rng);
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_GAUSSIAN_PROCESS_HPP
