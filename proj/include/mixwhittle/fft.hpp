#ifndef MIXWHITTLE_FFT_HPP
#define MIXWHITTLE_FFT_HPP

// Thin RAII wrapper around FFTW plans. Plans own aligned buffers; each thread
// keeps its own cache keyed by length, and plan creation (the only part of
// FFTW that is not thread-safe) is serialized.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include "mixwhittle/error.hpp"

namespace mixwhittle {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Forward real-to-complex DFT: out[k] = sum_t in[t] exp(-2 pi i k t / n),
/// k = 0..n/2.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        if (n == 0) throw DomainError("FFT length must be positive");
        in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
        out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft() {
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out) {
        if (in.size() != n_ || out.size() != spectrum_size()) throw LengthError("RealFft: buffer size mismatch");
        std::memcpy(in_, in.data(), sizeof(double) * n_);
        fftw_execute(plan_);
        std::memcpy(static_cast<void*>(out.data()), out_, sizeof(fftw_complex) * spectrum_size());
    }

private:
    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

/// Complex DFT of length n, sign -1 (forward) or +1 (backward, unnormalized).
class ComplexFft {
public:
    ComplexFft(std::size_t n, int sign) : n_(n) {
        if (n == 0) throw DomainError("FFT length must be positive");
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
    }
    ComplexFft(const ComplexFft&) = delete;
    ComplexFft& operator=(const ComplexFft&) = delete;
    ~ComplexFft() {
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(buf_);
    }

    void transform(std::span<std::complex<double>> data) {
        if (data.size() != n_) throw LengthError("ComplexFft: buffer size mismatch");
        std::memcpy(static_cast<void*>(buf_), data.data(), sizeof(fftw_complex) * n_);
        fftw_execute(plan_);
        std::memcpy(static_cast<void*>(data.data()), buf_, sizeof(fftw_complex) * n_);
    }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

/// Per-thread cached real FFT of length n.
inline RealFft& real_fft(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
}

inline ComplexFft& complex_fft(std::size_t n, int sign) {
    thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<ComplexFft>> cache;
    auto& slot = cache[{n, sign < 0 ? -1 : 1}];
    if (!slot) slot = std::make_unique<ComplexFft>(n, sign);
    return *slot;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_FFT_HPP
