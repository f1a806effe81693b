// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nsk/picard.hpp"

using namespace nsk;
using std::numbers::pi;

namespace {

double max_abs_diff(const RealField& a, const RealField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

double div_l2(const FlowState& s) {
    SpectralVectorField U;
    for (const auto& c : s.u) U.push_back(forward_transform(c));
    return l2_norm(divergence(U));
}

}  // namespace

TEST_CASE("equilibrium is a fixed point of the linearized sweep") {
    Grid g = make_grid(2, 16, 2 * pi);
    FlowState init = equilibrium_state(g, 1.2);
    attach_eta(init);
    PhysParams p;
    p.kappa = 1.0;
    p.alpha = 8.0;
    PicardIterate prev = constant_iterate(init, 0.05, 0.01);
    PicardIterate next = linearized_step(prev, init, p);
    REQUIRE(next.index == 1);
    REQUIRE(next.mesh.size() == prev.mesh.size());
    for (const auto& s : next.mesh) {
        REQUIRE(max_abs_diff(s.rho, init.rho) < 1e-14);
        for (int c = 0; c < 2; ++c) {
            REQUIRE(max_abs_diff(s.u[c], init.u[c]) < 1e-14);
            REQUIRE(max_abs_diff(s.eta[c], init.eta[c]) < 1e-14);
        }
    }
}

TEST_CASE("first linearized iterate is divergence-free on the whole mesh") {
    Grid g = make_grid(2, 32, 2 * pi);
    FlowState init = taylor_green_state(g, 1.0);
    attach_eta(init);
    PhysParams p;
    p.kappa = 1.0;
    p.alpha = 8.0;
    PicardIterate prev = constant_iterate(init, 0.04, cfl_dt(init, p, 0.5));
    PicardIterate next = linearized_step(prev, init, p);
    for (const auto& s : next.mesh) REQUIRE(div_l2(s) < 1e-8);
}

TEST_CASE("picard_solve contracts and matches the direct nonlinear solve") {
    Grid g = make_grid(2, 32, 2 * pi);
    FlowState init = taylor_green_state(g, 1.0);
    PhysParams p;
    p.kappa = 1.0;
    p.alpha = 8.0;
    const double T = 0.05;
    auto [fixed_point, report] = picard_solve(init, p, T, 1e-10, 25);

    REQUIRE(report.converged);
    REQUIRE_FALSE(report.non_contraction);
    REQUIRE(report.x_sequence.front() > report.x_sequence.back());
    // eventually geometric: last few ratios below 1
    REQUIRE(report.ratios.size() >= 2);
    for (std::size_t i = report.ratios.size() - 2; i < report.ratios.size(); ++i)
        REQUIRE(report.ratios[i] < 1.0);

    // cross-solver agreement on the shared mesh
    SimOptions opt;
    opt.frames = static_cast<int>(fixed_point.steps());
    Trajectory direct = simulate(init, p, T, DtPolicy::fixed(fixed_point.dt), opt);
    REQUIRE_FALSE(direct.blown_up);
    REQUIRE(direct.frames.size() == fixed_point.mesh.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < direct.frames.size(); ++k) {
        worst = std::max(worst, max_abs_diff(direct.frames[k].rho, fixed_point.mesh[k].rho));
        for (int c = 0; c < 2; ++c)
            worst = std::max(worst,
                             max_abs_diff(direct.frames[k].u[c], fixed_point.mesh[k].u[c]));
    }
    REQUIRE(worst < 1e-6);

    REQUIRE(eta_consistency(fixed_point) < 1e-8);
}

TEST_CASE("eta_consistency") {
    Grid g = make_grid(2, 16, 2 * pi);
    FlowState init = taylor_green_state(g, 1.0);
    attach_eta(init);

    SECTION("zero at t = 0 by construction") {
        PicardIterate it = constant_iterate(init, 0.01, 0.01);
        REQUIRE(eta_consistency(it) < 1e-12);
    }

    SECTION("an injected perturbation is measured at its L2 size") {
        PicardIterate it = constant_iterate(init, 0.01, 0.01);
        const double delta = 1e-3;
        RealField bump = sample_field(g, [=](double x, double, double) {
            return delta * std::sin(x);
        });
        for (std::size_t i = 0; i < bump.values.size(); ++i)
            it.mesh[1].eta[0].values[i] += bump.values[i];
        REQUIRE(eta_consistency(it) == Catch::Approx(delta * pi * std::sqrt(2.0)).epsilon(1e-6));
    }
}

TEST_CASE("an over-long horizon does not crash; the report stays well-formed") {
    Grid g = make_grid(2, 16, 2 * pi);
    FlowState init = taylor_green_state(g, 1.0);
    PhysParams p;
    p.kappa = 1.0;
    p.alpha = 16.0;
    auto [it, report] = picard_solve(init, p, 1.5, 1e-12, 4, 0.015);
    REQUIRE(report.iterations <= 4);
    for (double x : report.x_sequence) {
        REQUIRE(std::isfinite(x));
        REQUIRE(x >= 0.0);
    }
    REQUIRE(report.ratios.size() + 1 == report.x_sequence.size());
}
