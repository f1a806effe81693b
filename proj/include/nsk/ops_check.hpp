// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nsk/experiments.hpp"
#include "nsk/nonlocal.hpp"
#include "nsk/random_field.hpp"

namespace nsk {

/// Result of the multiplier-calculus property suite on random band-limited
/// fields: the four operator relations plus the defect identity
/// (k_alpha^2 - I) = alpha^-2 k_alpha^2 Delta.
struct OpsCheckReport {
    int trials = 0;
    double alpha = 0.0;
    bool nonexpansive = true;
    bool gradient_bound = true;
    bool approximation = true;
    bool self_adjoint = true;
    bool multiplier_identity = true;
    // worst observed ratios (<= 1 + slack when passing)
    double worst_nonexpansive = 0.0;
    double worst_gradient = 0.0;
    double worst_approximation = 0.0;
    double worst_self_adjoint = 0.0;   // |<kf,g>-<f,kg>| / (1e-12 ||f|| ||g||)
    double worst_multiplier = 0.0;     // defect / (1e-14 reference)

    bool all_pass() const {
        return nonexpansive && gradient_bound && approximation && self_adjoint &&
               multiplier_identity;
    }

    std::vector<std::string> lines() const {
        auto row = [](const char* name, bool ok, double worst) {
            return std::string(name) + (ok ? ": PASS" : ": FAIL") +
                   " (worst ratio " + std::to_string(worst) + ")";
        };
        return {
            row("non-expansiveness  ||k_a f||_Hs <= ||f||_Hs", nonexpansive, worst_nonexpansive),
            row("gradient bound     ||grad k_a^2 f||_Hs <= a ||f||_Hs", gradient_bound,
                worst_gradient),
            row("approximation      ||(k_a^2-I)f||_Hs <= a^-l ||f||_Hs+l", approximation,
                worst_approximation),
            row("self-adjointness   <k_a f, g> = <f, k_a g>", self_adjoint, worst_self_adjoint),
            row("defect identity    (k_a^2-I) = a^-2 k_a^2 Delta", multiplier_identity,
                worst_multiplier),
        };
    }
};

inline OpsCheckReport check_operator_suite(int n, double alpha, int trials,
                                           std::uint64_t seed = 2024, int dim = 2) {
    Grid g = make_grid(dim, n, 2.0 * std::numbers::pi);
    RelaxationParam a(alpha);
    OpsCheckReport rep;
    rep.trials = trials;
    rep.alpha = alpha;
    const double slack = 1.0 + 1e-12;
    const int band = g.n() / 3;

    for (int t = 0; t < trials; ++t) {
        RealField f = random_band_limited(g, band, seed + 2 * t);
        RealField h = random_band_limited(g, band, seed + 2 * t + 1);
        SpectralField F = forward_transform(f);
        SpectralField H = forward_transform(h);
        SpectralField Kf = apply_k_alpha(F, a);
        SpectralField K2f = apply_k_alpha_sq(F, a);
        SpectralField Rf = relaxation_residual(F, a);

        for (double s : {0.0, 1.0, 2.0, 3.0}) {
            const double nf = sobolev_norm(F, s);
            const double r1 = sobolev_norm(Kf, s) / nf;
            rep.worst_nonexpansive = std::max(rep.worst_nonexpansive, r1);
            if (r1 > slack) rep.nonexpansive = false;

            const double r2 = std::sqrt(grad_sobolev_norm_sq(K2f, s)) / (alpha * nf);
            rep.worst_gradient = std::max(rep.worst_gradient, r2);
            if (r2 > slack) rep.gradient_bound = false;
        }
        for (double s : {0.0, 1.0})
            for (double l : {0.0, 0.5, 1.0, 2.0}) {
                const double r = sobolev_norm(Rf, s) /
                                 (std::pow(alpha, -l) * sobolev_norm(F, s + l));
                rep.worst_approximation = std::max(rep.worst_approximation, r);
                if (r > slack) rep.approximation = false;
            }
        {
            const double gap = std::abs(l2_inner(Kf, H) - l2_inner(F, apply_k_alpha(H, a)));
            const double r = gap / (1e-12 * l2_norm(F) * l2_norm(H));
            rep.worst_self_adjoint = std::max(rep.worst_self_adjoint, r);
            if (r > 1.0) rep.self_adjoint = false;
        }
        {
            SpectralField other = apply_k_alpha_sq(laplacian(F), a);
            const double inv_a2 = 1.0 / (alpha * alpha);
            SpectralField defect(g);
            for (std::size_t i = 0; i < other.coeffs.size(); ++i)
                defect.coeffs[i] = Rf.coeffs[i] - inv_a2 * other.coeffs[i];
            const double r =
                l2_norm(defect) / (1e-14 * std::max(l2_norm(Rf), 1e-300));
            rep.worst_multiplier = std::max(rep.worst_multiplier, r);
            if (r > 1.0) rep.multiplier_identity = false;
        }
    }
    return rep;
}

}  // namespace nsk
