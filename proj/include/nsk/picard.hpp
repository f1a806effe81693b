// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsk/dynamics.hpp"
#include "nsk/presets.hpp"

namespace nsk {

namespace detail {

struct PicardStage {
    RealField rho;
    VectorField u;
    VectorField eta;
};

}  // namespace detail

/// One iterate of the linearized scheme: the solution (rho^n, u^n, eta^n) on
/// the shared time mesh t_k = k dt, plus its values at the four Runge-Kutta
/// stage nodes of every step.  The stage values are what the next iterate
/// freezes as coefficients; freezing stage-consistent values makes the
/// iteration's fixed point coincide with the direct nonlinear integration of
/// the same mesh.
struct PicardIterate {
    std::vector<FlowState> mesh;                          // size steps+1
    std::vector<std::array<detail::PicardStage, 4>> stages;  // size steps
    int index = 0;
    double dt = 0.0;

    double horizon() const { return mesh.empty() ? 0.0 : mesh.back().time; }
    long steps() const { return static_cast<long>(stages.size()); }
};

struct ContractionReport {
    std::vector<double> x_sequence;  // sup_t X^n, n = 1, 2, ...
    std::vector<double> ratios;      // successive quotients
    bool converged = false;
    bool non_contraction = false;    // ratios > 1 three times in a row
    int iterations = 0;
};

namespace detail {

inline PicardStage stage_of(const FlowState& s) {
    return PicardStage{s.rho, s.u, s.eta};
}

// L2^2 distance between two iterates at one mesh index:
// ||drho||^2 + ||du||^2 + ||deta||^2 by the exact periodic quadrature.
inline double x_metric_at(const FlowState& a, const FlowState& b) {
    const Grid& g = a.grid();
    const double cell = std::pow(g.dx(), g.dim());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rho.values.size(); ++i) {
        const double dr = a.rho.values[i] - b.rho.values[i];
        acc += dr * dr;
    }
    for (std::size_t c = 0; c < a.u.size(); ++c)
        for (std::size_t i = 0; i < a.u[c].values.size(); ++i) {
            const double du = a.u[c].values[i] - b.u[c].values[i];
            acc += du * du;
        }
    for (std::size_t c = 0; c < a.eta.size(); ++c)
        for (std::size_t i = 0; i < a.eta[c].values.size(); ++i) {
            const double de = a.eta[c].values[i] - b.eta[c].values[i];
            acc += de * de;
        }
    return acc * cell;
}

// Linearized momentum/eta right-hand side: frozen coefficients (rho^n, u^n,
// eta^n), unknowns (u, eta) of the n+1 iterate.
//   du_j   = -(u^n.grad)u_j + (rho^n)^-1 (Delta u_j - kappa eta^n_j div k_a^2 eta - d_j pi)
//   deta_j = -u^n.grad eta_j - (d_j u).eta^n
struct LinearRhs {
    VectorField du;
    VectorField deta;
    RealField pi;
};

inline LinearRhs linear_momentum_eta_rhs(const PicardStage& frozen, const VectorField& u,
                                         const VectorField& eta, const PhysParams& p,
                                         const RhsOptions& opt) {
    const Grid& g = frozen.rho.grid;
    const int d = g.dim();
    LinearRhs out;

    SpectralVectorField U(d), E(d);
    if (d == 2) {
        forward_transform2(u[0], u[1], U[0], U[1]);
        forward_transform2(eta[0], eta[1], E[0], E[1]);
    } else {
        forward_transform2(u[0], u[1], U[0], U[1]);
        U[2] = forward_transform(u[2]);
        forward_transform2(eta[0], eta[1], E[0], E[1]);
        E[2] = forward_transform(eta[2]);
    }

    // div k_alpha^2 eta and the capillary force -kappa eta^n_j (div k_a^2 eta)
    VectorField force;
    const double kappa = p.effective_kappa();
    if (kappa > 0.0) {
        SpectralVectorField KE(d);
        for (int c = 0; c < d; ++c)
            KE[c] = p.system == SystemKind::RelaxedINSK
                        ? apply_k_alpha_sq(E[c], RelaxationParam(p.alpha))
                        : E[c];
        RealField divk = inverse_transform(divergence(KE));
        force.assign(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < divk.values.size(); ++i)
                force[j].values[i] = -kappa * frozen.eta[j].values[i] * divk.values[i];
        SpectralField F0, F1;
        forward_transform2(force[0], force[1], F0, F1);
        dealias_in_place(F0);
        dealias_in_place(F1);
        inverse_transform2(F0, F1, force[0], force[1]);
        if (d == 3) {
            SpectralField F2 = forward_transform(force[2]);
            dealias_in_place(F2);
            force[2] = inverse_transform(F2);
        }
    }

    // gradients of the unknowns
    std::vector<VectorField> du_p(d, VectorField(d, RealField(g)));
    for (int j = 0; j < d; ++j) {
        if (d == 2) {
            inverse_transform2(partial_derivative(U[j], 0), partial_derivative(U[j], 1),
                               du_p[j][0], du_p[j][1]);
        } else {
            inverse_transform2(partial_derivative(U[j], 0), partial_derivative(U[j], 1),
                               du_p[j][0], du_p[j][1]);
            du_p[j][2] = inverse_transform(partial_derivative(U[j], 2));
        }
    }

    RealField beta(g);
    for (std::size_t i = 0; i < beta.values.size(); ++i)
        beta.values[i] = 1.0 / frozen.rho.values[i];

    // g_j = beta (Delta u_j + F_j) - (u^n.grad)u_j
    SpectralVectorField Gh(d);
    {
        VectorField visc(d, RealField(g));
        if (d == 2) {
            inverse_transform2(laplacian(U[0]), laplacian(U[1]), visc[0], visc[1]);
        } else {
            inverse_transform2(laplacian(U[0]), laplacian(U[1]), visc[0], visc[1]);
            visc[2] = inverse_transform(laplacian(U[2]));
        }
        VectorField gphys(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < gphys[j].values.size(); ++i) {
                double adv = 0.0;
                for (int c = 0; c < d; ++c)
                    adv += frozen.u[c].values[i] * du_p[j][c].values[i];
                const double s = visc[j].values[i] + (force.empty() ? 0.0 : force[j].values[i]);
                gphys[j].values[i] = beta.values[i] * s - adv;
            }
        // beta*s and the advection mix band-limited factors with beta's full
        // spectrum; a single dealias after the combined product keeps the
        // iterate in band.
        if (d == 2) {
            forward_transform2(gphys[0], gphys[1], Gh[0], Gh[1]);
        } else {
            forward_transform2(gphys[0], gphys[1], Gh[0], Gh[1]);
            Gh[2] = forward_transform(gphys[2]);
        }
        for (int j = 0; j < d; ++j) dealias_in_place(Gh[j]);
    }

    PressureSolution ps =
        solve_pressure_spectral(frozen.rho, Gh, opt.pressure_tol, opt.pressure_max_iter,
                                opt.pressure_cache);
    out.pi = ps.pi;
    if (opt.pressure_cache) *opt.pressure_cache = ps.pi_hat;

    {
        VectorField G(d, RealField(g));
        if (d == 2) {
            inverse_transform2(partial_derivative(ps.pi_hat, 0),
                               partial_derivative(ps.pi_hat, 1), G[0], G[1]);
        } else {
            inverse_transform2(partial_derivative(ps.pi_hat, 0),
                               partial_derivative(ps.pi_hat, 1), G[0], G[1]);
            G[2] = inverse_transform(partial_derivative(ps.pi_hat, 2));
        }
        VectorField bg(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < bg[j].values.size(); ++i)
                bg[j].values[i] = beta.values[i] * G[j].values[i];
        SpectralVectorField BG(d);
        if (d == 2) {
            forward_transform2(bg[0], bg[1], BG[0], BG[1]);
        } else {
            forward_transform2(bg[0], bg[1], BG[0], BG[1]);
            BG[2] = forward_transform(bg[2]);
        }
        for (int j = 0; j < d; ++j) {
            dealias_in_place(BG[j]);
            for (std::size_t i = 0; i < Gh[j].coeffs.size(); ++i)
                Gh[j].coeffs[i] -= BG[j].coeffs[i];
        }
    }
    Gh = leray_project(Gh);
    out.du.assign(d, RealField(g));
    if (d == 2) {
        inverse_transform2(Gh[0], Gh[1], out.du[0], out.du[1]);
    } else {
        inverse_transform2(Gh[0], Gh[1], out.du[0], out.du[1]);
        out.du[2] = inverse_transform(Gh[2]);
    }

    // deta_j = -u^n.grad eta_j - (d_j u).eta^n
    out.deta.assign(d, RealField(g));
    for (int j = 0; j < d; ++j) {
        VectorField de(d, RealField(g));
        if (d == 2) {
            inverse_transform2(partial_derivative(E[j], 0), partial_derivative(E[j], 1), de[0],
                               de[1]);
        } else {
            inverse_transform2(partial_derivative(E[j], 0), partial_derivative(E[j], 1), de[0],
                               de[1]);
            de[2] = inverse_transform(partial_derivative(E[j], 2));
        }
        RealField r(g);
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            double adv = 0.0, stretch = 0.0;
            for (int c = 0; c < d; ++c) {
                adv += frozen.u[c].values[i] * de[c].values[i];
                stretch += du_p[c][j].values[i] * frozen.eta[c].values[i];
            }
            r.values[i] = -adv - stretch;
        }
        SpectralField Rj = forward_transform(r);
        dealias_in_place(Rj);
        out.deta[j] = inverse_transform(Rj);
    }
    return out;
}

inline RealField advect_rhs(const RealField& rho, const VectorField& u) {
    const Grid& g = rho.grid;
    SpectralField R = forward_transform(rho);
    RealField out(g);
    VectorField dr(g.dim(), RealField(g));
    if (g.dim() == 2) {
        inverse_transform2(partial_derivative(R, 0), partial_derivative(R, 1), dr[0], dr[1]);
    } else {
        inverse_transform2(partial_derivative(R, 0), partial_derivative(R, 1), dr[0], dr[1]);
        dr[2] = inverse_transform(partial_derivative(R, 2));
    }
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < u.size(); ++c) acc += u[c].values[i] * dr[c].values[i];
        out.values[i] = -acc;
    }
    SpectralField O = forward_transform(out);
    dealias_in_place(O);
    return inverse_transform(O);
}

}  // namespace detail

/// prev^0: the constant-in-time iterate equal to the initial data.
inline PicardIterate constant_iterate(const FlowState& init, double T, double dt_target) {
    if (!(T > 0.0)) throw std::invalid_argument("constant_iterate: T must be positive");
    if (!(dt_target > 0.0)) throw std::invalid_argument("constant_iterate: dt must be positive");
    if (!init.has_eta())
        throw std::invalid_argument("constant_iterate: initial state must carry eta");
    PicardIterate it;
    const long m = std::max<long>(1, std::lround(std::ceil(T / dt_target - 1e-12)));
    it.dt = T / static_cast<double>(m);
    it.index = 0;
    it.mesh.assign(m + 1, init);
    for (long k = 0; k <= m; ++k) it.mesh[k].time = it.dt * static_cast<double>(k);
    it.stages.assign(m, {detail::stage_of(init), detail::stage_of(init), detail::stage_of(init),
                         detail::stage_of(init)});
    return it;
}

/// One sweep of the linearized scheme: the momentum/eta pair is advanced over
/// the whole mesh with coefficients frozen from `prev` (read at the matching
/// stage nodes), then the density is advected by the newly computed velocity.
inline PicardIterate linearized_step(const PicardIterate& prev, const FlowState& init,
                                     const PhysParams& params, double pressure_tol = 1e-12) {
    if (prev.mesh.empty()) throw std::invalid_argument("linearized_step: empty previous iterate");
    const Grid& g = init.grid();
    const int d = g.dim();
    const long m = prev.steps();
    const double dt = prev.dt;

    PicardIterate next;
    next.dt = dt;
    next.index = prev.index + 1;
    next.mesh.reserve(m + 1);
    next.mesh.push_back(init);
    next.mesh.front().time = 0.0;
    next.stages.assign(m, {});

    detail::RhsOptions opt;
    SpectralField cache;
    opt.pressure_tol = pressure_tol;
    opt.pressure_cache = &cache;

    // momentum + eta sweep
    std::vector<VectorField> u_mesh(m + 1), eta_mesh(m + 1);
    std::vector<RealField> pi_mesh(m + 1);
    u_mesh[0] = init.u;
    eta_mesh[0] = init.eta;
    pi_mesh[0] = init.pi;
    for (long k = 0; k < m; ++k) {
        const auto& fs = prev.stages[k];
        VectorField u0 = u_mesh[k], e0 = eta_mesh[k];

        auto record = [&](int s, const VectorField& u, const VectorField& e) {
            next.stages[k][s].u = u;
            next.stages[k][s].eta = e;
        };

        record(0, u0, e0);
        detail::LinearRhs k1 = detail::linear_momentum_eta_rhs(fs[0], u0, e0, params, opt);
        VectorField u2 = u0, e2 = e0;
        for (int c = 0; c < d; ++c) {
            detail::axpy(u2[c], 0.5 * dt, k1.du[c]);
            detail::axpy(e2[c], 0.5 * dt, k1.deta[c]);
        }
        record(1, u2, e2);
        detail::LinearRhs k2 = detail::linear_momentum_eta_rhs(fs[1], u2, e2, params, opt);
        VectorField u3 = u0, e3 = e0;
        for (int c = 0; c < d; ++c) {
            detail::axpy(u3[c], 0.5 * dt, k2.du[c]);
            detail::axpy(e3[c], 0.5 * dt, k2.deta[c]);
        }
        record(2, u3, e3);
        detail::LinearRhs k3 = detail::linear_momentum_eta_rhs(fs[2], u3, e3, params, opt);
        VectorField u4 = u0, e4 = e0;
        for (int c = 0; c < d; ++c) {
            detail::axpy(u4[c], dt, k3.du[c]);
            detail::axpy(e4[c], dt, k3.deta[c]);
        }
        record(3, u4, e4);
        detail::LinearRhs k4 = detail::linear_momentum_eta_rhs(fs[3], u4, e4, params, opt);

        VectorField un = u0, en = e0;
        for (int c = 0; c < d; ++c) {
            detail::axpy(un[c], dt / 6.0, k1.du[c]);
            detail::axpy(un[c], dt / 3.0, k2.du[c]);
            detail::axpy(un[c], dt / 3.0, k3.du[c]);
            detail::axpy(un[c], dt / 6.0, k4.du[c]);
            detail::axpy(en[c], dt / 6.0, k1.deta[c]);
            detail::axpy(en[c], dt / 3.0, k2.deta[c]);
            detail::axpy(en[c], dt / 3.0, k3.deta[c]);
            detail::axpy(en[c], dt / 6.0, k4.deta[c]);
        }
        // re-project as the direct integrator does
        {
            SpectralVectorField U(d);
            if (d == 2) {
                forward_transform2(un[0], un[1], U[0], U[1]);
            } else {
                forward_transform2(un[0], un[1], U[0], U[1]);
                U[2] = forward_transform(un[2]);
            }
            U = leray_project(U);
            if (d == 2) {
                inverse_transform2(U[0], U[1], un[0], un[1]);
            } else {
                inverse_transform2(U[0], U[1], un[0], un[1]);
                un[2] = inverse_transform(U[2]);
            }
        }
        u_mesh[k + 1] = std::move(un);
        eta_mesh[k + 1] = std::move(en);
        pi_mesh[k + 1] = std::move(k4.pi);
    }

    // density sweep, advected by the new velocity's stage values
    std::vector<RealField> rho_mesh(m + 1);
    rho_mesh[0] = init.rho;
    for (long k = 0; k < m; ++k) {
        const RealField& r0 = rho_mesh[k];
        next.stages[k][0].rho = r0;
        RealField k1 = detail::advect_rhs(r0, next.stages[k][0].u);
        RealField r2 = r0;
        detail::axpy(r2, 0.5 * dt, k1);
        next.stages[k][1].rho = r2;
        RealField k2 = detail::advect_rhs(r2, next.stages[k][1].u);
        RealField r3 = r0;
        detail::axpy(r3, 0.5 * dt, k2);
        next.stages[k][2].rho = r3;
        RealField k3 = detail::advect_rhs(r3, next.stages[k][2].u);
        RealField r4 = r0;
        detail::axpy(r4, dt, k3);
        next.stages[k][3].rho = r4;
        RealField k4 = detail::advect_rhs(r4, next.stages[k][3].u);
        RealField rn = r0;
        detail::axpy(rn, dt / 6.0, k1);
        detail::axpy(rn, dt / 3.0, k2);
        detail::axpy(rn, dt / 3.0, k3);
        detail::axpy(rn, dt / 6.0, k4);
        rho_mesh[k + 1] = std::move(rn);
    }

    for (long k = 1; k <= m; ++k) {
        FlowState s;
        s.rho = std::move(rho_mesh[k]);
        s.u = std::move(u_mesh[k]);
        s.eta = std::move(eta_mesh[k]);
        s.pi = std::move(pi_mesh[k]);
        s.time = dt * static_cast<double>(k);
        detail::check_state_valid(s, s.time);
        next.mesh.push_back(std::move(s));
    }
    return next;
}

/// Iterate the linearized scheme until sup_t X^n <= tol or max_iter sweeps.
/// X^n is the squared L2 distance between successive iterates summed over
/// (rho, u, eta), sup taken over the shared time mesh.
inline std::pair<PicardIterate, ContractionReport> picard_solve(const FlowState& init_in,
                                                                const PhysParams& params,
                                                                double T, double tol,
                                                                int max_iter,
                                                                double dt_target = 0.0,
                                                                double pressure_tol = 1e-12) {
    params.validate();
    if (!(tol > 0.0)) throw std::invalid_argument("picard_solve: tol must be positive");
    FlowState init = init_in;
    if (!init.has_eta()) attach_eta(init);
    if (dt_target <= 0.0) dt_target = cfl_dt(init, params, 0.5);

    PicardIterate prev = constant_iterate(init, T, dt_target);
    ContractionReport report;
    int consecutive_expanding = 0;
    for (int n = 1; n <= max_iter; ++n) {
        PicardIterate next = linearized_step(prev, init, params, pressure_tol);
        double x_sup = 0.0;
        for (std::size_t k = 0; k < next.mesh.size(); ++k)
            x_sup = std::max(x_sup, detail::x_metric_at(next.mesh[k], prev.mesh[k]));
        report.x_sequence.push_back(x_sup);
        report.iterations = n;
        if (report.x_sequence.size() >= 2) {
            const double prev_x = report.x_sequence[report.x_sequence.size() - 2];
            const double ratio = prev_x > 0.0 ? x_sup / prev_x : 0.0;
            report.ratios.push_back(ratio);
            consecutive_expanding = ratio > 1.0 ? consecutive_expanding + 1 : 0;
        }
        prev = std::move(next);
        if (x_sup <= tol) {
            report.converged = true;
            break;
        }
        if (consecutive_expanding >= 3) {
            report.non_contraction = true;
            break;
        }
    }
    return {std::move(prev), std::move(report)};
}

/// max over the time mesh of ||eta - grad rho||_{L2}.
inline double eta_consistency(const PicardIterate& iterate) {
    double worst = 0.0;
    for (const auto& s : iterate.mesh) {
        if (!s.has_eta()) throw std::invalid_argument("eta_consistency: iterate carries no eta");
        SpectralField R = forward_transform(s.rho);
        const Grid& g = s.grid();
        const double cell = std::pow(g.dx(), g.dim());
        double acc = 0.0;
        for (int c = 0; c < g.dim(); ++c) {
            RealField dr = inverse_transform(partial_derivative(R, c));
            for (std::size_t i = 0; i < dr.values.size(); ++i) {
                const double d = s.eta[c].values[i] - dr.values[i];
                acc += d * d;
            }
        }
        worst = std::max(worst, std::sqrt(acc * cell));
    }
    return worst;
}

}  // namespace nsk
