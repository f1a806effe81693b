// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

#include "nsk/field.hpp"
#include "nsk/spectral_ops.hpp"
#include "nsk/transform.hpp"

namespace nsk {

/// Relaxation scale alpha of the multiplier k_alpha(xi) = alpha/sqrt(alpha^2+|xi|^2).
struct RelaxationParam {
    double alpha;

    explicit RelaxationParam(double a) : alpha(a) {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("RelaxationParam: alpha must be positive and finite");
    }
};

/// k_alpha: coefficient-wise scaling by alpha/sqrt(alpha^2 + |kappa|^2).
inline SpectralField apply_k_alpha(const SpectralField& F, RelaxationParam alpha) {
    SpectralField out(F.grid);
    const double a2 = alpha.alpha * alpha.alpha;
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>& kap,
                                      const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        out.coeffs[idx] = F.coeffs[idx] * (alpha.alpha / std::sqrt(a2 + k2));
    });
    return out;
}

/// k_alpha^2: inverse of the screened Poisson operator (alpha^2 - Delta)/alpha^2.
/// The output c satisfies alpha^2 c - Delta c = alpha^2 rho exactly in
/// coefficient space.
inline SpectralField apply_k_alpha_sq(const SpectralField& F, RelaxationParam alpha) {
    SpectralField out(F.grid);
    const double a2 = alpha.alpha * alpha.alpha;
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>& kap,
                                      const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        out.coeffs[idx] = F.coeffs[idx] * (a2 / (a2 + k2));
    });
    return out;
}

/// (k_alpha^2 - I)F, the relaxation defect.  Identical, as a multiplier, to
/// alpha^-2 k_alpha^2 Delta F: both equal -|kappa|^2/(alpha^2+|kappa|^2).
inline SpectralField relaxation_residual(const SpectralField& F, RelaxationParam alpha) {
    SpectralField out(F.grid);
    const double a2 = alpha.alpha * alpha.alpha;
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>& kap,
                                      const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        out.coeffs[idx] = F.coeffs[idx] * (-k2 / (a2 + k2));
    });
    return out;
}

/// Orthogonal projection onto divergence-free fields:
/// u_j -= kappa_j (kappa . u)/|kappa|^2 for every nonzero mode.
inline SpectralVectorField leray_project(const SpectralVectorField& U) {
    if (U.empty()) throw std::invalid_argument("leray_project: empty vector field");
    const Grid& g = U[0].grid;
    const int d = g.dim();
    if (static_cast<int>(U.size()) != d)
        throw std::invalid_argument("leray_project: component count does not match dim");
    for (int a = 1; a < d; ++a)
        if (U[a].grid != g) throw std::invalid_argument("leray_project: grid mismatch");

    SpectralVectorField out(U);
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                 const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        if (k2 == 0.0) return;  // zero mode untouched
        std::complex<double> kdotu = 0.0;
        for (int a = 0; a < d; ++a) kdotu += kap[a] * U[a].coeffs[idx];
        kdotu /= k2;
        for (int a = 0; a < d; ++a) out[a].coeffs[idx] -= kap[a] * kdotu;
    });
    return out;
}

enum class ForceMode { Nonlocal, Local };

/// Korteweg force in the rewritten (projection-equivalent) form:
/// component i = -kappa (d_i rho)(k_alpha^2 Delta rho), or with Delta rho in
/// local mode.  The pointwise product is dealiased.
inline VectorField korteweg_force(const RealField& rho, double kappa, RelaxationParam alpha,
                                  ForceMode mode) {
    if (kappa < 0.0) throw std::invalid_argument("korteweg_force: kappa must be >= 0");
    const Grid& g = rho.grid;
    const int d = g.dim();

    VectorField force;
    if (kappa == 0.0) {
        for (int a = 0; a < d; ++a) force.emplace_back(g);
        return force;
    }

    SpectralField R = forward_transform(rho);
    SpectralField lap = laplacian(R);
    if (mode == ForceMode::Nonlocal) lap = apply_k_alpha_sq(lap, alpha);
    RealField m = inverse_transform(lap);

    VectorField drho;
    for (int a = 0; a < d; ++a) drho.push_back(inverse_transform(partial_derivative(R, a)));

    for (int a = 0; a < d; ++a) {
        RealField f(g);
        for (std::size_t i = 0; i < f.values.size(); ++i)
            f.values[i] = -kappa * drho[a].values[i] * m.values[i];
        SpectralField Fs = forward_transform(f);
        dealias_in_place(Fs);
        force.push_back(inverse_transform(Fs));
    }
    return force;
}

}  // namespace nsk
