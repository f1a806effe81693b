// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "nsk/field.hpp"
#include "nsk/grid.hpp"
#include "nsk/spectral_ops.hpp"
#include "nsk/transform.hpp"

namespace nsk {

/// Random real field, band-limited to |k_axis| <= band, unit-variance
/// Gaussian coefficients with Hermitian symmetry.  Deterministic per seed.
inline RealField random_band_limited(const Grid& g, int band, std::uint64_t seed,
                                     bool zero_mean = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpectralField F(g);
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>&,
                                 const std::array<int, 3>& km) {
        if (std::abs(km[0]) > band || std::abs(km[1]) > band || std::abs(km[2]) > band) return;
        F.coeffs[idx] = std::complex<double>(gauss(rng), gauss(rng));
    });
    // Symmetrize: c(k) <- (c(k) + conj(c(-k)))/2.
    SpectralField S(g);
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) {
        const std::size_t j = detail::conjugate_index(g, i);
        S.coeffs[i] = 0.5 * (F.coeffs[i] + std::conj(F.coeffs[j]));
    }
    if (zero_mean) S.coeffs[0] = 0.0;
    return inverse_transform(S);
}

/// Random scalar field with an algebraic spectral tail |coeff(k)| ~
/// amplitude * (1+|k|^2)^(-decay/2), Hermitian random phases, zero mean,
/// restricted to the 2/3-dealiased band.  decay = 5.25 in 2D gives a field
/// that is (marginally) H^4 under grid refinement; decay = 4.25 gives
/// marginal H^3.
inline RealField random_algebraic_tail(const Grid& g, double amplitude, double decay,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const int band = g.n() / 3;
    SpectralField F(g);
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>&,
                                 const std::array<int, 3>& km) {
        if (std::abs(km[0]) > band || std::abs(km[1]) > band || std::abs(km[2]) > band) return;
        const double k2 = static_cast<double>(km[0]) * km[0] +
                          static_cast<double>(km[1]) * km[1] +
                          static_cast<double>(km[2]) * km[2];
        if (k2 == 0.0) return;
        const double mag = amplitude * std::pow(1.0 + k2, -0.5 * decay);
        const double th = phase(rng);
        F.coeffs[idx] = std::polar(mag, th);
    });
    SpectralField S(g);
    for (std::size_t i = 0; i < F.coeffs.size(); ++i) {
        const std::size_t j = detail::conjugate_index(g, i);
        S.coeffs[i] = 0.5 * (F.coeffs[i] + std::conj(F.coeffs[j]));
    }
    return inverse_transform(S);
}

}  // namespace nsk
