// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "nsk/field.hpp"
#include "nsk/grid.hpp"
#include "nsk/transform.hpp"

namespace nsk {
namespace detail {

/// Visit every mode: fn(flat_index, kappa, kmode) with kappa the physical
/// wavenumber vector and kmode the signed integer modes.
template <class Fn>
inline void for_each_mode(const Grid& g, Fn&& fn) {
    const int n = g.n();
    std::array<double, 3> kap{0.0, 0.0, 0.0};
    std::array<int, 3> km{0, 0, 0};
    std::size_t idx = 0;
    if (g.dim() == 2) {
        for (int i = 0; i < n; ++i) {
            kap[0] = g.wavenumber(i);
            km[0] = g.mode(i);
            for (int j = 0; j < n; ++j, ++idx) {
                kap[1] = g.wavenumber(j);
                km[1] = g.mode(j);
                fn(idx, kap, km);
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            kap[0] = g.wavenumber(i);
            km[0] = g.mode(i);
            for (int j = 0; j < n; ++j) {
                kap[1] = g.wavenumber(j);
                km[1] = g.mode(j);
                for (int k = 0; k < n; ++k, ++idx) {
                    kap[2] = g.wavenumber(k);
                    km[2] = g.mode(k);
                    fn(idx, kap, km);
                }
            }
        }
    }
}

}  // namespace detail

/// d/dx_axis as the Fourier multiplier i*kappa; the Nyquist mode along the
/// differentiated axis is zeroed (odd-derivative convention on even grids).
inline SpectralField partial_derivative(const SpectralField& F, int axis) {
    const Grid& g = F.grid;
    if (axis < 0 || axis >= g.dim())
        throw std::invalid_argument("partial_derivative: axis out of range");
    SpectralField out(g);
    const int nyq = -g.n() / 2;
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                 const std::array<int, 3>& km) {
        if (km[axis] == nyq) {
            out.coeffs[idx] = 0.0;
        } else {
            const std::complex<double> c = F.coeffs[idx];
            out.coeffs[idx] = std::complex<double>(-kap[axis] * c.imag(), kap[axis] * c.real());
        }
    });
    return out;
}

inline SpectralField laplacian(const SpectralField& F) {
    SpectralField out(F.grid);
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>& kap,
                                      const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        out.coeffs[idx] = -k2 * F.coeffs[idx];
    });
    return out;
}

/// 2/3-rule mask: zero every coefficient with any |k_axis| > n/3.
inline SpectralField dealias(const SpectralField& F) {
    SpectralField out(F.grid);
    const int n = F.grid.n();
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>&,
                                      const std::array<int, 3>& km) {
        const bool keep = 3 * std::abs(km[0]) <= n && 3 * std::abs(km[1]) <= n &&
                          3 * std::abs(km[2]) <= n;
        out.coeffs[idx] = keep ? F.coeffs[idx] : 0.0;
    });
    return out;
}

inline void dealias_in_place(SpectralField& F) {
    const int n = F.grid.n();
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>&,
                                      const std::array<int, 3>& km) {
        if (3 * std::abs(km[0]) > n || 3 * std::abs(km[1]) > n || 3 * std::abs(km[2]) > n)
            F.coeffs[idx] = 0.0;
    });
}

/// H^s norm: sqrt( L^dim sum_k (1+|kappa|^2)^s |coeff|^2 ).  s = 0 is L^2.
inline double sobolev_norm(const SpectralField& F, double s) {
    const Grid& g = F.grid;
    double sum = 0.0;
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                 const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        const double w = (s == 0.0) ? 1.0 : std::pow(1.0 + k2, s);
        sum += w * std::norm(F.coeffs[idx]);
    });
    return std::sqrt(std::pow(g.length(), g.dim()) * sum);
}

inline double l2_norm(const SpectralField& F) { return sobolev_norm(F, 0.0); }

/// L^2 inner product of two real fields given by their coefficients.
inline double l2_inner(const SpectralField& F, const SpectralField& G) {
    if (F.grid != G.grid) throw std::invalid_argument("l2_inner: grid mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < F.coeffs.size(); ++i)
        sum += (F.coeffs[i] * std::conj(G.coeffs[i])).real();
    return std::pow(F.grid.length(), F.grid.dim()) * sum;
}

inline SpectralVectorField gradient(const SpectralField& F) {
    SpectralVectorField out;
    for (int a = 0; a < F.grid.dim(); ++a) out.push_back(partial_derivative(F, a));
    return out;
}

inline SpectralField divergence(const SpectralVectorField& U) {
    if (U.empty()) throw std::invalid_argument("divergence: empty vector field");
    const Grid& g = U[0].grid;
    if (static_cast<int>(U.size()) != g.dim())
        throw std::invalid_argument("divergence: component count does not match dim");
    SpectralField out(g);
    for (int a = 0; a < g.dim(); ++a) {
        SpectralField d = partial_derivative(U[a], a);
        for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] += d.coeffs[i];
    }
    return out;
}

/// L^2 norm of |grad f| summed over components (Nyquist rows excluded as in
/// partial_derivative).
inline double grad_l2_norm_sq(const SpectralField& F) {
    const Grid& g = F.grid;
    const int nyq = -g.n() / 2;
    double sum = 0.0;
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                 const std::array<int, 3>& km) {
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a)
            if (km[a] != nyq) k2 += kap[a] * kap[a];
        sum += k2 * std::norm(F.coeffs[idx]);
    });
    return std::pow(g.length(), g.dim()) * sum;
}

/// Largest Hermitian-symmetry violation max_k |c(-k) - conj(c(k))|.
inline double hermitian_defect(const SpectralField& F) {
    double worst = 0.0;
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) {
        const std::size_t j = detail::conjugate_index(F.grid, i);
        worst = std::max(worst, std::abs(F.coeffs[j] - std::conj(F.coeffs[i])));
    }
    return worst;
}

}  // namespace nsk
