// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nsk/dynamics.hpp"
#include "nsk/presets.hpp"

using namespace nsk;
using std::numbers::pi;

namespace {

double max_abs(const RealField& f) { return std::max(std::abs(f.max()), std::abs(f.min())); }

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

// integral rho u_c dx by the trapezoid-exact periodic quadrature
double momentum_component(const FlowState& s, int c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.rho.values.size(); ++i)
        acc += s.rho.values[i] * s.u[c].values[i];
    return acc * std::pow(s.grid().dx(), s.grid().dim());
}

double kinetic_energy(const FlowState& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.rho.values.size(); ++i) {
        double usq = 0.0;
        for (const auto& comp : s.u) usq += comp.values[i] * comp.values[i];
        acc += s.rho.values[i] * usq;
    }
    return 0.5 * acc * std::pow(s.grid().dx(), s.grid().dim());
}

}  // namespace

TEST_CASE("density_rhs closed forms") {
    Grid g = make_grid(2, 32, 2 * pi);

    SECTION("u = 0 gives 0") {
        FlowState s = equilibrium_state(g, 1.0);
        s.rho = sample_field(g, [](double x, double y, double) {
            return 1.0 + 0.3 * std::sin(x + y);
        });
        REQUIRE(max_abs(density_rhs(s)) < 1e-14);
    }

    SECTION("constant rho gives 0") {
        FlowState s = taylor_green_state(g, 1.0, 0.0);
        REQUIRE(max_abs(density_rhs(s)) < 1e-13);
    }

    SECTION("u = (1,0), rho = sin(x) gives -cos(x)") {
        FlowState s;
        s.rho = sample_field(g, [](double x, double, double) { return std::sin(x); });
        s.u.push_back(sample_field(g, [](double, double, double) { return 1.0; }));
        s.u.push_back(RealField(g));
        RealField r = density_rhs(s);
        RealField expect =
            sample_field(g, [](double x, double, double) { return -std::cos(x); });
        REQUIRE(max_abs_diff(r, expect) < 1e-12);
    }
}

TEST_CASE("solve_pressure") {
    Grid g = make_grid(2, 32, 2 * pi);

    SECTION("g = 0 gives pi = 0") {
        RealField rho = sample_field(g, [](double x, double, double) {
            return 1.0 + 0.2 * std::cos(x);
        });
        VectorField zero = {RealField(g), RealField(g)};
        REQUIRE(max_abs(solve_pressure(rho, zero)) == 0.0);
    }

    SECTION("constant rho converges in a single iteration, exactly") {
        RealField rho = sample_field(g, [](double, double, double) { return 0.9; });
        VectorField gv = {
            sample_field(g, [](double x, double y, double) { return std::sin(x) * std::cos(y); }),
            sample_field(g, [](double x, double y, double) { return std::cos(2 * x) * std::sin(y); })};
        SpectralVectorField gh;
        for (const auto& c : gv) gh.push_back(forward_transform(c));
        PressureSolution ps = solve_pressure_spectral(rho, gh);
        REQUIRE(ps.iterations == 1);
        // pi = Delta^-1 (rho_bar div g)
        SpectralField expect = divergence(gh);
        detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                     const std::array<int, 3>&) {
            const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
            expect.coeffs[idx] = k2 > 0 ? -0.9 / k2 * expect.coeffs[idx] : 0.0;
        });
        REQUIRE(max_abs_diff(ps.pi, inverse_transform(expect)) < 1e-13);
    }

    SECTION("variable rho: residual oracle below 1e-10 relative") {
        RealField rho = sample_field(g, [](double x, double, double) {
            return 1.0 + 0.2 * std::cos(x);
        });
        VectorField gv = {
            sample_field(g, [](double x, double y, double) { return std::sin(x + y); }),
            sample_field(g, [](double x, double y, double) { return std::cos(x) * std::sin(2 * y); })};
        RealField pi = solve_pressure(rho, gv);
        // oracle: assemble div(rho^-1 grad pi) - div g independently
        SpectralField P = forward_transform(pi);
        SpectralVectorField flux;
        for (int c = 0; c < 2; ++c) {
            RealField dp = inverse_transform(partial_derivative(P, c));
            RealField h(g);
            for (std::size_t i = 0; i < h.values.size(); ++i)
                h.values[i] = dp.values[i] / rho.values[i];
            SpectralField H = forward_transform(h);
            dealias_in_place(H);
            flux.push_back(H);
        }
        SpectralVectorField gh;
        for (const auto& c : gv) gh.push_back(forward_transform(c));
        SpectralField lhs = divergence(flux), rhs = divergence(gh);
        SpectralField resid(g);
        for (std::size_t i = 1; i < resid.coeffs.size(); ++i)
            resid.coeffs[i] = lhs.coeffs[i] - rhs.coeffs[i];
        REQUIRE(l2_norm(resid) <= 1e-10 * l2_norm(rhs));
        REQUIRE(std::abs(pi.mean()) < 1e-13);
    }

    SECTION("nonpositive rho rejected") {
        RealField rho = sample_field(g, [](double x, double, double) { return std::cos(x); });
        VectorField gv = {RealField(g), RealField(g)};
        REQUIRE_THROWS_AS(solve_pressure(rho, gv), std::invalid_argument);
    }
}

TEST_CASE("momentum_rhs") {
    Grid g = make_grid(2, 32, 2 * pi);

    SECTION("equilibrium gives 0") {
        FlowState s = equilibrium_state(g, 1.3);
        PhysParams p;
        p.kappa = 1.0;
        VectorField r = momentum_rhs(s, p);
        for (const auto& c : r) REQUIRE(max_abs(c) < 1e-13);
    }

    SECTION("constant density matches the projected constant-coefficient form") {
        const double rb = 1.25;
        FlowState s = taylor_green_state(g, rb, 0.0);
        PhysParams p;
        p.kappa = 0.0;
        p.system = SystemKind::NavierStokes;
        p.rho_bar = rb;
        VectorField r = momentum_rhs(s, p);

        // oracle: P[-(u.grad)u + Delta u / rho_bar]
        SpectralVectorField U = {forward_transform(s.u[0]), forward_transform(s.u[1])};
        SpectralVectorField G(2, SpectralField(g));
        for (int j = 0; j < 2; ++j) {
            RealField adv(g);
            for (int c = 0; c < 2; ++c) {
                RealField d = inverse_transform(partial_derivative(U[j], c));
                for (std::size_t i = 0; i < adv.values.size(); ++i)
                    adv.values[i] += s.u[c].values[i] * d.values[i];
            }
            SpectralField A = forward_transform(adv);
            dealias_in_place(A);
            SpectralField L = laplacian(U[j]);
            for (std::size_t i = 0; i < G[j].coeffs.size(); ++i)
                G[j].coeffs[i] = -A.coeffs[i] + L.coeffs[i] / rb;
        }
        G = leray_project(G);
        for (int j = 0; j < 2; ++j)
            REQUIRE(max_abs_diff(r[j], inverse_transform(G[j])) < 1e-11);

        SpectralVectorField R = {forward_transform(r[0]), forward_transform(r[1])};
        REQUIRE(l2_norm(divergence(R)) < 1e-10);
    }

    SECTION("relaxed and local systems differ by O(alpha^-2)") {
        // rho needs modes on several |xi|^2 shells: on a single shell k_alpha^2
        // is a scalar and the force difference is a pure gradient that the
        // projection removes.
        FlowState s = taylor_green_state(g, 1.0, 0.1);
        RealField extra = sample_field(g, [](double x, double y, double) {
            return 0.05 * std::cos(2 * x) + 0.03 * std::cos(x + 2 * y);
        });
        for (std::size_t i = 0; i < s.rho.values.size(); ++i)
            s.rho.values[i] += extra.values[i];
        PhysParams local;
        local.kappa = 1.0;
        local.system = SystemKind::LocalINSK;
        VectorField rl = momentum_rhs(s, local);
        std::vector<double> errs;
        for (double a : {8.0, 16.0, 32.0}) {
            PhysParams p;
            p.kappa = 1.0;
            p.alpha = a;
            p.system = SystemKind::RelaxedINSK;
            VectorField rr = momentum_rhs(s, p);
            double sq = 0.0;
            for (int c = 0; c < 2; ++c) {
                RealField diff(g);
                for (std::size_t i = 0; i < diff.values.size(); ++i)
                    diff.values[i] = rr[c].values[i] - rl[c].values[i];
                const double nrm = l2_norm(forward_transform(diff));
                sq += nrm * nrm;
            }
            errs.push_back(std::sqrt(sq));
        }
        REQUIRE(errs[0] / errs[1] == Catch::Approx(4.0).epsilon(0.25));
        REQUIRE(errs[1] / errs[2] == Catch::Approx(4.0).epsilon(0.25));
    }
}

TEST_CASE("cfl_dt candidates") {
    Grid g = make_grid(2, 32, 2 * pi);
    PhysParams p;

    SECTION("u = 0, kappa = 0: viscous bound times safety") {
        FlowState s = equilibrium_state(g, 0.8);
        p.kappa = 0.0;
        const double expect = 0.5 * 0.8 * g.dx() * g.dx() / 4.0;
        REQUIRE(cfl_dt(s, p, 0.5) == Catch::Approx(expect).epsilon(1e-9));
    }

    SECTION("doubling max|u| halves the advective candidate") {
        Grid gc = make_grid(2, 256, 2 * pi);  // fine grid so advection binds... still viscous
        FlowState s = equilibrium_state(g, 1.0);
        s.u[0] = sample_field(g, [](double, double, double) { return 40.0; });
        p.kappa = 0.0;
        const double d1 = cfl_dt(s, p, 1.0);
        s.u[0] = sample_field(g, [](double, double, double) { return 80.0; });
        const double d2 = cfl_dt(s, p, 1.0);
        REQUIRE(d1 == Catch::Approx(2.0 * d2).epsilon(1e-6));
    }

    SECTION("capillary bound active and equal to the minimum of the three") {
        FlowState s = taylor_green_state(g, 1.0, 0.1);  // |grad rho| ~ 0.1
        s.u[0] = RealField(g);
        s.u[1] = RealField(g);
        p.kappa = 1.0;
        p.alpha = 3200.0;
        const double got = cfl_dt(s, p, 1.0);
        SpectralField R = forward_transform(s.rho);
        double gmax = 0.0;
        RealField dx_ = inverse_transform(partial_derivative(R, 0));
        RealField dy_ = inverse_transform(partial_derivative(R, 1));
        for (std::size_t i = 0; i < dx_.values.size(); ++i)
            gmax = std::max(gmax, std::sqrt(dx_.values[i] * dx_.values[i] +
                                            dy_.values[i] * dy_.values[i]));
        const double adv = g.dx() / 1e-12;
        const double visc = s.rho.min() * g.dx() * g.dx() / 4.0;
        const double cap = 1.0 / (std::sqrt(1.0) * 3200.0 * gmax + 1e-12);
        REQUIRE(cap < visc);
        REQUIRE(got == Catch::Approx(std::min({adv, visc, cap})).epsilon(1e-12));
    }

    SECTION("safety validated") {
        FlowState s = equilibrium_state(g, 1.0);
        REQUIRE_THROWS_AS(cfl_dt(s, p, 0.0), std::invalid_argument);
        REQUIRE_THROWS_AS(cfl_dt(s, p, 1.5), std::invalid_argument);
    }
}

TEST_CASE("rk4_step") {
    SECTION("equilibrium is a fixed point to 1e-14") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = equilibrium_state(g, 1.1);
        PhysParams p;
        FlowState next = rk4_step(s, 0.01, p);
        REQUIRE(max_abs_diff(next.rho, s.rho) < 1e-14);
        for (int c = 0; c < 2; ++c) REQUIRE(max_abs_diff(next.u[c], s.u[c]) < 1e-14);
    }

    SECTION("pure-mode Stokes decay: u(dt) = e^-dt (sin y, 0) to O(dt^5)") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = equilibrium_state(g, 1.0);
        s.u[0] = sample_field(g, [](double, double y, double) { return std::sin(y); });
        PhysParams p;
        p.kappa = 0.0;
        p.system = SystemKind::NavierStokes;
        const double dt = 0.1;
        FlowState next = rk4_step(s, dt, p);
        RealField expect = sample_field(g, [=](double, double y, double) {
            return std::exp(-dt) * std::sin(y);
        });
        const double bound = 1.5 * std::pow(dt, 5) / 120.0;
        REQUIRE(max_abs_diff(next.u[0], expect) < bound);
        REQUIRE(max_abs_diff(next.u[0], expect) > 1e-12);  // error is real, not roundoff
        REQUIRE(max_abs(next.u[1]) < 1e-13);
    }

    SECTION("fourth-order self-convergence") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0);
        PhysParams p;
        p.kappa = 1.0;
        p.alpha = 8.0;
        const double t_end = 0.08;
        auto advance = [&](double dt) {
            FlowState cur = s;
            const long m = std::lround(t_end / dt);
            for (long k = 0; k < m; ++k) cur = rk4_step(cur, dt, p);
            return cur;
        };
        FlowState ref = advance(0.02 / 16);
        std::vector<double> errs;
        for (double dt : {0.02, 0.01, 0.005}) {
            FlowState got = advance(dt);
            double e = max_abs_diff(got.rho, ref.rho);
            for (int c = 0; c < 2; ++c) e = std::max(e, max_abs_diff(got.u[c], ref.u[c]));
            errs.push_back(e);
        }
        const double slope1 = std::log2(errs[0] / errs[1]);
        const double slope2 = std::log2(errs[1] / errs[2]);
        REQUIRE(slope1 == Catch::Approx(4.0).margin(0.3));
        REQUIRE(slope2 == Catch::Approx(4.0).margin(0.45));
    }
}

TEST_CASE("simulate") {
    PhysParams p;

    SECTION("t_end = 0 yields only the initial frame") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0);
        Trajectory t = simulate(s, p, 0.0, DtPolicy::cfl(0.5));
        REQUIRE(t.frames.size() == 1);
        REQUIRE_FALSE(t.blown_up);
    }

    SECTION("Navier-Stokes kinetic energy decays monotonically") {
        Grid g = make_grid(2, 32, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0, 0.0);
        PhysParams ns;
        ns.kappa = 0.0;
        ns.system = SystemKind::NavierStokes;
        SimOptions opt;
        opt.frames = 8;
        Trajectory t = simulate(s, ns, 0.2, DtPolicy::cfl(0.5), opt);
        REQUIRE_FALSE(t.blown_up);
        REQUIRE(t.frames.size() == 9);
        for (std::size_t i = 1; i < t.frames.size(); ++i)
            REQUIRE(kinetic_energy(t.frames[i]) < kinetic_energy(t.frames[i - 1]));
    }

    SECTION("dissipation integral matches the exact Stokes value") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = equilibrium_state(g, 1.0);
        s.u[0] = sample_field(g, [](double, double y, double) { return std::sin(y); });
        PhysParams ns;
        ns.kappa = 0.0;
        ns.system = SystemKind::NavierStokes;
        SimOptions opt;
        opt.frames = 4;
        Trajectory t = simulate(s, ns, 0.4, DtPolicy::fixed(0.005), opt);
        for (const auto& f : t.frames) {
            const double exact = pi * pi * (1.0 - std::exp(-2.0 * f.time));
            REQUIRE(f.dissipation == Catch::Approx(exact).margin(1e-9));
        }
    }

    SECTION("frames satisfy the flow-state invariants") {
        Grid g = make_grid(2, 32, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0);
        SimOptions opt;
        opt.frames = 4;
        Trajectory t = simulate(s, p, 0.05, DtPolicy::cfl(0.5), opt);
        REQUIRE_FALSE(t.blown_up);
        const double p_ref = [&] {
            double acc = 0.0;
            for (std::size_t i = 0; i < s.rho.values.size(); ++i) {
                double m = 0.0;
                for (const auto& c : s.u) m += std::abs(c.values[i]);
                acc += s.rho.values[i] * m;
            }
            return acc * std::pow(g.dx(), 2);
        }();
        for (const auto& f : t.frames) {
            REQUIRE(div_l2(f) < 1e-8);
            REQUIRE(std::abs(f.pi.mean()) < 1e-12);
            for (int c = 0; c < 2; ++c)
                REQUIRE(std::abs(momentum_component(f, c) - momentum_component(s, c)) <
                        1e-8 * p_ref);
        }
        // transport max principle within tolerance
        const double band = s.rho.max() - s.rho.min();
        REQUIRE(t.rho_min_seen >= s.rho.min() - 1e-3 * band);
        REQUIRE(t.rho_max_seen <= s.rho.max() + 1e-3 * band);
    }

    SECTION("blow-up ceiling produces a flagged partial trajectory") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0);
        SimOptions opt;
        opt.frames = 4;
        opt.blowup_ceiling = 1e-3;  // guaranteed trip on the first frame
        Trajectory t = simulate(s, p, 0.02, DtPolicy::cfl(0.5), opt);
        REQUIRE(t.blown_up);
        REQUIRE(t.frames.size() >= 1);
        REQUIRE_FALSE(t.blowup_message.empty());
    }

    SECTION("negative t_end and nonpositive density rejected") {
        Grid g = make_grid(2, 16, 2 * pi);
        FlowState s = taylor_green_state(g, 1.0);
        REQUIRE_THROWS_AS(simulate(s, p, -1.0, DtPolicy::cfl(0.5)), std::invalid_argument);
        FlowState bad = taylor_green_state(g, 0.1);  // rho dips below zero
        REQUIRE_THROWS_AS(simulate(bad, p, 0.1, DtPolicy::cfl(0.5)), std::invalid_argument);
    }
}

TEST_CASE("eta transported alongside stays equal to grad rho") {
    Grid g = make_grid(2, 32, 2 * pi);
    FlowState s = taylor_green_state(g, 1.0);
    attach_eta(s);
    PhysParams p;
    p.kappa = 1.0;
    p.alpha = 8.0;
    SimOptions opt;
    opt.frames = 2;
    Trajectory t = simulate(s, p, 0.05, DtPolicy::cfl(0.5), opt);
    REQUIRE_FALSE(t.blown_up);
    for (const auto& f : t.frames) {
        SpectralField R = forward_transform(f.rho);
        for (int c = 0; c < 2; ++c) {
            RealField grad = inverse_transform(partial_derivative(R, c));
            REQUIRE(max_abs_diff(grad, f.eta[c]) < 1e-10);
        }
    }
}
