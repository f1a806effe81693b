// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "nsk/field.hpp"
#include "nsk/grid.hpp"

namespace nsk {
namespace detail {

// One forward/backward c2c plan pair per (dim, n), planned on fftw_malloc'd
// buffers so SIMD codelets apply; FFTW_ESTIMATE keeps the plan choice
// deterministic across runs.  Execution goes through per-thread scratch
// buffers with the same (fftw_malloc) alignment, so fftw_execute_dft is safe
// and concurrent.  Plans live for the process lifetime; creation is
// serialized.
struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

inline const PlanPair& plans_for(const Grid& g) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(g.dim(), g.n());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    fftw_complex* a = fftw_alloc_complex(g.size());
    fftw_complex* b = fftw_alloc_complex(g.size());
    int dims[3] = {g.n(), g.n(), g.n()};
    PlanPair p;
    p.forward = fftw_plan_dft(g.dim(), dims, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
    p.backward = fftw_plan_dft(g.dim(), dims, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(a);
    fftw_free(b);
    if (!p.forward || !p.backward) throw std::runtime_error("fftw plan creation failed");
    return cache.emplace(key, p).first->second;
}

// Per-thread aligned scratch pair, grown on demand.
struct Scratch {
    std::complex<double>* in = nullptr;
    std::complex<double>* out = nullptr;
    std::size_t capacity = 0;

    void ensure(std::size_t n) {
        if (capacity >= n) return;
        if (in) fftw_free(in);
        if (out) fftw_free(out);
        in = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
        out = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
        capacity = n;
    }
    ~Scratch() {
        if (in) fftw_free(in);
        if (out) fftw_free(out);
    }
};

inline Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

/// RAII fftw_malloc'd complex buffer; matches the alignment the cached plans
/// were created with, so fftw_execute_dft on it is valid.
class AlignedComplex {
public:
    explicit AlignedComplex(std::size_t n)
        : ptr_(reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n))), size_(n) {}
    ~AlignedComplex() { fftw_free(ptr_); }
    AlignedComplex(const AlignedComplex&) = delete;
    AlignedComplex& operator=(const AlignedComplex&) = delete;
    std::complex<double>* data() { return ptr_; }
    std::complex<double>& operator[](std::size_t i) { return ptr_[i]; }
    const std::complex<double>& operator[](std::size_t i) const { return ptr_[i]; }
    std::size_t size() const { return size_; }

private:
    std::complex<double>* ptr_;
    std::size_t size_;
};

inline void execute(fftw_plan plan, std::complex<double>* in, std::complex<double>* out) {
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
}

// FFT-order index of -k for flat index idx.
inline std::size_t conjugate_index(const Grid& g, std::size_t idx) {
    const std::size_t n = static_cast<std::size_t>(g.n());
    if (g.dim() == 2) {
        std::size_t i = idx / n, j = idx % n;
        return ((n - i) % n) * n + (n - j) % n;
    }
    std::size_t k = idx % n, rest = idx / n;
    std::size_t j = rest % n, i = rest / n;
    return (((n - i) % n) * n + (n - j) % n) * n + (n - k) % n;
}

}  // namespace detail

inline SpectralField forward_transform(const RealField& f) {
    const Grid& g = f.grid;
    auto& ws = detail::scratch();
    ws.ensure(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ws.in[i] = f.values[i];
    detail::execute(detail::plans_for(g).forward, ws.in, ws.out);
    SpectralField F(g);
    const double scale = 1.0 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) F.coeffs[i] = scale * ws.out[i];
    return F;
}

inline RealField inverse_transform(const SpectralField& F) {
    const Grid& g = F.grid;
    auto& ws = detail::scratch();
    ws.ensure(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ws.in[i] = F.coeffs[i];
    detail::execute(detail::plans_for(g).backward, ws.in, ws.out);
    RealField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f.values[i] = ws.out[i].real();
    return f;
}

/// Transform two real fields with a single complex FFT (f + i*h packing).
inline void forward_transform2(const RealField& f, const RealField& h, SpectralField& F,
                               SpectralField& H) {
    const Grid& g = f.grid;
    if (h.grid != g) throw std::invalid_argument("forward_transform2: grid mismatch");
    auto& ws = detail::scratch();
    ws.ensure(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) ws.in[i] = {f.values[i], h.values[i]};
    detail::execute(detail::plans_for(g).forward, ws.in, ws.out);
    F = SpectralField(g);
    H = SpectralField(g);
    const double scale = 0.5 / static_cast<double>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::complex<double> a = ws.out[i];
        const std::complex<double> b = std::conj(ws.out[detail::conjugate_index(g, i)]);
        F.coeffs[i] = scale * (a + b);
        H.coeffs[i] = scale * std::complex<double>(a.imag() - b.imag(), b.real() - a.real());
    }
}

/// Inverse-transform two Hermitian spectral fields with one complex FFT.
inline void inverse_transform2(const SpectralField& F, const SpectralField& H, RealField& f,
                               RealField& h) {
    const Grid& g = F.grid;
    if (H.grid != g) throw std::invalid_argument("inverse_transform2: grid mismatch");
    auto& ws = detail::scratch();
    ws.ensure(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        ws.in[i] = {F.coeffs[i].real() - H.coeffs[i].imag(),
                    F.coeffs[i].imag() + H.coeffs[i].real()};
    detail::execute(detail::plans_for(g).backward, ws.in, ws.out);
    f = RealField(g);
    h = RealField(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        f.values[i] = ws.out[i].real();
        h.values[i] = ws.out[i].imag();
    }
}

}  // namespace nsk
