// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nsk/dynamics.hpp"
#include "nsk/field.hpp"
#include "nsk/nonlocal.hpp"
#include "nsk/random_field.hpp"

namespace nsk {

/// rho = rho_bar + 0.2 cos(qx)cos(qy)[cos(qz)], u = Taylor-Green, q the
/// fundamental wavenumber 2*pi/L.  Satisfies rho_min > 0 and div u = 0.
inline FlowState taylor_green_state(const Grid& g, double rho_bar, double amplitude = 0.2) {
    const double q = 2.0 * std::numbers::pi / g.length();
    FlowState s;
    if (g.dim() == 2) {
        s.rho = sample_field(g, [=](double x, double y, double) {
            return rho_bar + amplitude * std::cos(q * x) * std::cos(q * y);
        });
        s.u.push_back(sample_field(g, [=](double x, double y, double) {
            return std::sin(q * x) * std::cos(q * y);
        }));
        s.u.push_back(sample_field(g, [=](double x, double y, double) {
            return -std::cos(q * x) * std::sin(q * y);
        }));
    } else {
        s.rho = sample_field(g, [=](double x, double y, double z) {
            return rho_bar + amplitude * std::cos(q * x) * std::cos(q * y) * std::cos(q * z);
        });
        s.u.push_back(sample_field(g, [=](double x, double y, double z) {
            return std::sin(q * x) * std::cos(q * y) * std::cos(q * z);
        }));
        s.u.push_back(sample_field(g, [=](double x, double y, double z) {
            return -std::cos(q * x) * std::sin(q * y) * std::cos(q * z);
        }));
        s.u.push_back(RealField(g));
    }
    s.pi = RealField(g);
    return s;
}

inline FlowState equilibrium_state(const Grid& g, double rho_bar) {
    FlowState s;
    s.rho = sample_field(g, [=](double, double, double) { return rho_bar; });
    for (int c = 0; c < g.dim(); ++c) s.u.push_back(RealField(g));
    s.pi = RealField(g);
    return s;
}

/// Taylor-Green base plus seeded algebraic spectral tails: the density tail
/// is marginally H^4 and the velocity tail marginally H^3, the sharp classes
/// for the relaxation-limit rates.  Tail amplitudes keep rho well away from
/// zero.
inline FlowState rate_study_state(const Grid& g, double rho_bar, std::uint64_t seed,
                                  double rho_tail_linf = 0.05, double u_tail_linf = 0.05) {
    FlowState s = taylor_green_state(g, rho_bar);
    RealField tail = random_algebraic_tail(g, 1.0, 5.25, seed);
    const double m = std::max(std::abs(tail.max()), std::abs(tail.min()));
    if (m > 0.0)
        for (std::size_t i = 0; i < tail.values.size(); ++i)
            s.rho.values[i] += rho_tail_linf / m * tail.values[i];

    SpectralVectorField U(g.dim());
    for (int c = 0; c < g.dim(); ++c)
        U[c] = forward_transform(random_algebraic_tail(g, 1.0, 4.25, seed + 101 + c));
    U = leray_project(U);
    for (int c = 0; c < g.dim(); ++c) {
        RealField t = inverse_transform(U[c]);
        const double mu = std::max(std::abs(t.max()), std::abs(t.min()));
        if (mu > 0.0)
            for (std::size_t i = 0; i < t.values.size(); ++i)
                s.u[c].values[i] += u_tail_linf / mu * t.values[i];
    }
    return s;
}

/// eta = grad rho, computed spectrally; attaches the auxiliary field.
inline void attach_eta(FlowState& s) {
    SpectralField R = forward_transform(s.rho);
    s.eta.clear();
    for (int c = 0; c < s.grid().dim(); ++c)
        s.eta.push_back(inverse_transform(partial_derivative(R, c)));
}

}  // namespace nsk
