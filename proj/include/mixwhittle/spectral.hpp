#ifndef MIXWHITTLE_SPECTRAL_HPP
#define MIXWHITTLE_SPECTRAL_HPP

// Periodograms and expected periodograms on the n-point Fourier grid.
//
// All spectra are returned in FFT order: entry k holds frequency 2 pi k / n,
// which is the grid point omega_j with j = k for k <= n/2 and j = k - n
// otherwise. Likelihood sums run over all n entries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "mixwhittle/error.hpp"
#include "mixwhittle/fft.hpp"

namespace mixwhittle {

struct FrequencyGrid {
    std::size_t n = 0;

    explicit FrequencyGrid(std::size_t length) : n(length) {
        if (n == 0) throw DomainError("frequency grid needs n >= 1");
    }

    /// Fourier index j in {-ceil(n/2)+1, ..., floor(n/2)} stored at FFT slot k.
    long index(std::size_t k) const {
        const auto kk = static_cast<long>(k);
        return kk <= static_cast<long>(n / 2) ? kk : kk - static_cast<long>(n);
    }

    double omega(std::size_t k) const { return 2.0 * std::numbers::pi * static_cast<double>(index(k)) / double(n); }

    std::vector<double> frequencies() const {
        std::vector<double> w(n);
        for (std::size_t k = 0; k < n; ++k) w[k] = omega(k);
        return w;
    }
};

/// Regularly sampled series with an observation mask (g_t = 1 observed).
/// Values at unobserved times are placeholders and are never read.
struct ObservedSeries {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    static ObservedSeries complete(std::vector<double> v) {
        ObservedSeries s;
        s.mask.assign(v.size(), 1);
        s.values = std::move(v);
        return s;
    }

    std::size_t size() const noexcept { return values.size(); }

    std::size_t observed_count() const {
        return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    }

    bool observed(std::size_t t) const { return mask[t] != 0; }

    std::vector<std::size_t> observed_indices() const {
        std::vector<std::size_t> idx;
        idx.reserve(values.size());
        for (std::size_t t = 0; t < mask.size(); ++t)
            if (mask[t]) idx.push_back(t);
        return idx;
    }

    /// g_t x_t, with masked entries exactly zero.
    std::vector<double> modulated() const {
        std::vector<double> out(values.size(), 0.0);
        for (std::size_t t = 0; t < values.size(); ++t)
            if (mask[t]) out[t] = values[t];
        return out;
    }

    void validate() const {
        if (mask.size() != values.size()) throw LengthError("mask length differs from value length");
        for (auto g : mask)
            if (g > 1) throw DomainError("mask entries must be 0 or 1");
        if (observed_count() < 2) throw LengthError("series needs at least 2 observed values");
    }
};

// ---------------------------------------------------------------------------

namespace detail {
inline std::vector<double> full_from_half(std::span<const std::complex<double>> half, std::size_t n, double scale) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < half.size(); ++k) out[k] = std::norm(half[k]) * scale;
    for (std::size_t k = half.size(); k < n; ++k) out[k] = out[n - k];
    return out;
}
}  // namespace detail

/// I_k = |sum_t y_t exp(-i omega_k t)|^2 / n.
inline std::vector<double> periodogram(std::span<const double> y) {
    const std::size_t n = y.size();
    if (n == 0) throw DomainError("periodogram of an empty series");
    auto& fft = real_fft(n);
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    fft.forward(y, spec);
    return detail::full_from_half(spec, n, 1.0 / double(n));
}

/// Periodogram of g_t (x_t - M^(t) beta). Masked entries contribute zero.
inline std::vector<double> modulated_residual_periodogram(const ObservedSeries& series, const Eigen::MatrixXd& design,
                                                          const Eigen::VectorXd& beta) {
    const std::size_t n = series.size();
    if (series.mask.size() != n) throw LengthError("mask length differs from value length");
    if (static_cast<std::size_t>(design.rows()) != n || design.cols() != beta.size())
        throw LengthError("design matrix dimensions do not match series and coefficients");
    std::vector<double> r(n, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        if (series.mask[t]) r[t] = series.values[t] - design.row(static_cast<Eigen::Index>(t)).dot(beta);
    return periodogram(r);
}

/// (1/n) sum_t g_t g_{t+tau} for tau = 0..n-1, computed by a zero-padded FFT.
inline std::vector<double> mask_pair_fractions(std::span<const std::uint8_t> mask) {
    const std::size_t n = mask.size();
    if (n == 0) throw LengthError("empty mask");
    std::vector<double> out(n, 0.0);
    const std::size_t ones = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
    if (ones == 0) return out;
    if (ones == n) {
        for (std::size_t tau = 0; tau < n; ++tau) out[tau] = double(n - tau) / double(n);
        return out;
    }
    const std::size_t len = 2 * n;
    std::vector<double> padded(len, 0.0);
    for (std::size_t t = 0; t < n; ++t) padded[t] = mask[t] ? 1.0 : 0.0;
    auto& fft = real_fft(len);
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    fft.forward(padded, spec);
    // |G|^2 is real and even, so its inverse DFT is a forward DFT divided by len.
    std::vector<double> power = detail::full_from_half(spec, len, 1.0);
    fft.forward(power, spec);
    for (std::size_t tau = 0; tau < n; ++tau) out[tau] = std::round(spec[tau].real() / double(len)) / double(n);
    return out;
}

/// c~(tau) = c(tau) (1/n) sum_t g_t g_{t+tau}.
inline std::vector<double> modulated_acv(std::span<const double> acv_seq, std::span<const std::uint8_t> mask) {
    if (acv_seq.size() != mask.size()) throw LengthError("autocovariance and mask lengths differ");
    auto out = mask_pair_fractions(mask);
    for (std::size_t tau = 0; tau < out.size(); ++tau) out[tau] *= acv_seq[tau];
    return out;
}

/// Same as modulated_acv with precomputed pair fractions.
inline std::vector<double> modulated_acv(std::span<const double> acv_seq, const std::vector<double>& pair_fractions) {
    if (acv_seq.size() != pair_fractions.size()) throw LengthError("autocovariance and mask lengths differ");
    std::vector<double> out(acv_seq.size());
    for (std::size_t tau = 0; tau < out.size(); ++tau) out[tau] = acv_seq[tau] * pair_fractions[tau];
    return out;
}

/// (1 - tau/n) c(tau): the complete-data special case of modulated_acv.
inline std::vector<double> tapered_acv(std::span<const double> acv_seq) {
    const std::size_t n = acv_seq.size();
    std::vector<double> out(n);
    for (std::size_t tau = 0; tau < n; ++tau) out[tau] = acv_seq[tau] * double(n - tau) / double(n);
    return out;
}

/// f_k = 2 Re[sum_tau cbar(tau) exp(-i omega_k tau)] - cbar(0), unclipped.
inline std::vector<double> expected_periodogram_raw(std::span<const double> cbar) {
    const std::size_t n = cbar.size();
    if (n == 0) throw LengthError("empty autocovariance sequence");
    auto& fft = real_fft(n);
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    fft.forward(cbar, spec);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < spec.size(); ++k) out[k] = 2.0 * spec[k].real() - cbar[0];
    for (std::size_t k = spec.size(); k < n; ++k) out[k] = out[n - k];
    return out;
}

struct SpectrumFloor {
    double negative_tolerance = 1e-9;  // relative to cbar(0)
    double relative_floor = 1e-12;     // relative to cbar(0)
};

/// Expected periodogram with a consistency check and a positive floor.
/// Values below -tolerance * cbar(0) mean the covariance model is not valid
/// for this mask and raise NumericalError.
inline std::vector<double> expected_periodogram(std::span<const double> cbar, SpectrumFloor floor = {}) {
    auto f = expected_periodogram_raw(cbar);
    const double scale = std::max(std::abs(cbar[0]), std::numeric_limits<double>::min());
    const double lowest = -floor.negative_tolerance * std::max(scale, 1.0);
    const double clip = floor.relative_floor * scale;
    for (double& v : f) {
        if (!(v >= lowest)) throw NumericalError("expected periodogram is negative: " + std::to_string(v));
        if (v < clip) v = clip;
    }
    return f;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_SPECTRAL_HPP
