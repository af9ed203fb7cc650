#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "kinfp/field.hpp"

namespace kinfp {

inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

// Fourier transform along the periodic x axes of one time slice laid out
// [x0][x1][v0][v1] with v fastest. FFTW_ESTIMATE keeps plans deterministic.
class XSpectral {
public:
    explicit XSpectral(const Grid& g)
        : d_(g.d), nx_(g.nx), L_(g.L), howmany_(static_cast<int>(g.nvd())) {
        nxc_ = nx_ / 2 + 1;
        n_complex_ = (d_ == 1 ? nxc_ : static_cast<std::int64_t>(nx_) * nxc_) * howmany_;
        n_real_ = (d_ == 1 ? nx_ : static_cast<std::int64_t>(nx_) * nx_) * howmany_;
        real_ = fftw_alloc_real(static_cast<std::size_t>(n_real_));
        cplx_ = fftw_alloc_complex(static_cast<std::size_t>(n_complex_));
        if (!real_ || !cplx_) throw std::bad_alloc();
        int n[2] = {nx_, nx_};
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fwd_ = fftw_plan_many_dft_r2c(d_, n, howmany_, real_, nullptr, howmany_, 1, cplx_,
                                      nullptr, howmany_, 1, FFTW_ESTIMATE);
        bwd_ = fftw_plan_many_dft_c2r(d_, n, howmany_, cplx_, nullptr, howmany_, 1, real_,
                                      nullptr, howmany_, 1, FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw std::runtime_error("XSpectral: plan creation failed");
    }
    XSpectral(const XSpectral&) = delete;
    XSpectral& operator=(const XSpectral&) = delete;
    ~XSpectral() {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(cplx_);
    }

    std::int64_t n_complex() const { return n_complex_; }
    int half_modes() const { return nxc_; }

    // physical wavenumber of complex index along axis a
    double wavenumber(int a, int kidx) const {
        int k = kidx;
        if (d_ == 2 && a == 0 && kidx > nx_ / 2) k = kidx - nx_;
        return 2.0 * std::numbers::pi * k / L_;
    }

    void forward(const double* slice, std::complex<double>* out) const {
        for (std::int64_t i = 0; i < n_real_; ++i) real_[i] = slice[i];
        fftw_execute(fwd_);
        auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
        for (std::int64_t i = 0; i < n_complex_; ++i) out[i] = c[i];
    }

    // includes the 1/nx^d normalization so inverse(forward(f)) == f
    void inverse(const std::complex<double>* in, double* slice) const {
        auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
        for (std::int64_t i = 0; i < n_complex_; ++i) c[i] = in[i];
        fftw_execute(bwd_);
        const double scale = 1.0 / std::pow(static_cast<double>(nx_), d_);
        for (std::int64_t i = 0; i < n_real_; ++i) slice[i] = real_[i] * scale;
    }

    // g(x,v) <- g(x - v dt, v): an exact advection step and an l2 isometry,
    // each Fourier coefficient is multiplied by a unit-modulus phase
    void shift_characteristic(double* slice, const Grid& g, double dt) const {
        forward(slice, scratch());
        std::complex<double>* c = scratch();
        const std::int64_t nvd = g.nvd();
        const std::int64_t nk = d_ == 1 ? nxc_ : static_cast<std::int64_t>(nx_) * nxc_;
        for (std::int64_t kf = 0; kf < nk; ++kf) {
            const int k1 = static_cast<int>(kf % nxc_);
            const int k0 = static_cast<int>(kf / nxc_);
            const double w1 = wavenumber(d_ == 1 ? 0 : 1, k1);
            const double w0 = d_ == 2 ? wavenumber(0, k0) : 0.0;
            for (std::int64_t q = 0; q < nvd; ++q) {
                double kv;
                if (d_ == 1) {
                    kv = w1 * g.v(static_cast<int>(q));
                } else {
                    const int iv1 = static_cast<int>(q % g.nv);
                    const int iv0 = static_cast<int>(q / g.nv);
                    kv = w0 * g.v(iv0) + w1 * g.v(iv1);
                }
                const double ph = -kv * dt;
                c[kf * nvd + q] *= std::complex<double>(std::cos(ph), std::sin(ph));
            }
        }
        inverse(c, slice);
    }

    std::complex<double>* scratch() const {
        if (scratch_.empty()) scratch_.resize(static_cast<std::size_t>(n_complex_));
        return scratch_.data();
    }

private:
    int d_, nx_, nxc_ = 0;
    double L_;
    int howmany_;
    std::int64_t n_complex_ = 0, n_real_ = 0;
    double* real_ = nullptr;
    fftw_complex* cplx_ = nullptr;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
    mutable std::vector<std::complex<double>> scratch_;
};

}  // namespace kinfp
