// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsk/field.hpp"
#include "nsk/grid.hpp"
#include "nsk/nonlocal.hpp"
#include "nsk/spectral_ops.hpp"
#include "nsk/transform.hpp"

namespace nsk {

enum class SystemKind { RelaxedINSK, LocalINSK, NavierStokes };

inline std::string to_string(SystemKind s) {
    switch (s) {
        case SystemKind::RelaxedINSK: return "relaxed_insk";
        case SystemKind::LocalINSK: return "local_insk";
        case SystemKind::NavierStokes: return "navier_stokes";
    }
    return "?";
}

struct PhysParams {
    double kappa = 1.0;       // capillarity coefficient, >= 0
    double alpha = 16.0;      // relaxation scale, > 0
    double rho_bar = 1.0;     // background density, > 0
    double kappa_max = 10.0;  // configured upper bound kappa_0
    SystemKind system = SystemKind::RelaxedINSK;
    // viscosity is normalized to 1 throughout

    void validate() const {
        if (!(kappa >= 0.0) || !std::isfinite(kappa))
            throw std::invalid_argument("PhysParams: kappa must be >= 0 and finite");
        if (kappa > kappa_max)
            throw std::invalid_argument("PhysParams: kappa exceeds the configured bound kappa_max");
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("PhysParams: alpha must be positive and finite");
        if (!(rho_bar > 0.0))
            throw std::invalid_argument("PhysParams: rho_bar must be positive");
    }

    double effective_kappa() const {
        return system == SystemKind::NavierStokes ? 0.0 : kappa;
    }
};

/// One instant of the flow: physical-space density, solenoidal velocity,
/// zero-mean pressure, and (optionally) the auxiliary gradient field eta.
/// `dissipation` accumulates int_0^t ||grad u||_{L2}^2 alongside the state.
struct FlowState {
    RealField rho;
    VectorField u;
    RealField pi;
    VectorField eta;  // empty unless carried
    double time = 0.0;
    double dissipation = 0.0;

    bool has_eta() const { return !eta.empty(); }
    const Grid& grid() const { return rho.grid; }
};

namespace detail {

struct FlowDelta {
    RealField drho;
    VectorField du;
    VectorField deta;
    double ddissipation = 0.0;
};

inline void axpy(RealField& y, double a, const RealField& x) {
    for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
}

inline FlowState state_plus(const FlowState& s, double a, const FlowDelta& d) {
    FlowState out = s;
    axpy(out.rho, a, d.drho);
    for (std::size_t c = 0; c < out.u.size(); ++c) axpy(out.u[c], a, d.du[c]);
    for (std::size_t c = 0; c < out.eta.size(); ++c) axpy(out.eta[c], a, d.deta[c]);
    out.dissipation += a * d.ddissipation;
    return out;
}

}  // namespace detail

struct PressureSolution {
    RealField pi;
    SpectralField pi_hat;
    int iterations = 0;
    double residual = 0.0;   // absolute L2 residual of div(rho^-1 grad pi) - div g
    double rhs_norm = 0.0;   // L2 norm of div g
};

/// Solve div(rho^-1 grad pi) = div g on the torus, pi mean-zero, by the
/// preconditioned fixed-point iteration
///   pi <- Delta^-1[ rho_ref ( div g - div((rho^-1 - rho_ref^-1) grad pi) ) ],
/// rho_ref the harmonic mean of the density bounds.  The contraction factor
/// is (rho_max - rho_min)/(rho_max + rho_min) < 1.
///
/// Hot kernel: the gradient pair is packed into one complex transform per
/// direction pair, the variable-coefficient product is a single real multiply
/// of the packed array, and the divergence/residual/update run as fused mode
/// passes on preallocated aligned buffers.
inline PressureSolution solve_pressure_spectral(const RealField& rho,
                                                const SpectralVectorField& g_hat,
                                                double tol = 1e-12, int max_iter = 500,
                                                const SpectralField* guess = nullptr) {
    const Grid& g = rho.grid;
    const int d = g.dim();
    const std::size_t N = g.size();
    const double rho_min = rho.min();
    const double rho_max = rho.max();
    if (!(rho_min > 0.0))
        throw std::invalid_argument("solve_pressure: density must be strictly positive");

    PressureSolution sol;
    SpectralField rhs = divergence(g_hat);
    rhs.coeffs[0] = 0.0;
    sol.rhs_norm = l2_norm(rhs);
    if (sol.rhs_norm == 0.0) {
        sol.pi = RealField(g);
        sol.pi_hat = SpectralField(g);
        return sol;
    }

    const double rho_ref = 2.0 * rho_min * rho_max / (rho_min + rho_max);
    const double beta_ref = 1.0 / rho_ref;
    std::vector<double> beta_dev(N);  // rho^-1 - rho_ref^-1
    for (std::size_t i = 0; i < N; ++i) beta_dev[i] = 1.0 / rho.values[i] - beta_ref;

    SpectralField pi_hat = (guess && guess->grid == g) ? *guess : SpectralField(g);

    const fftw_plan fwd = detail::plans_for(g).forward;
    const fftw_plan bwd = detail::plans_for(g).backward;
    detail::AlignedComplex buf_a(N), buf_b(N);
    std::vector<std::complex<double>> w(N), resid(N);
    const double fft_scale = 1.0 / static_cast<double>(N);
    const double vol = std::pow(g.length(), d);
    const int n = g.n();

    // grad pi in physical space, beta-weighted, back to spectral divergence w
    auto assemble_w = [&](int axis0, int axis1, bool accumulate) {
        detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                     const std::array<int, 3>&) {
            const std::complex<double> c = pi_hat.coeffs[idx];
            // pack (d_axis0 pi) + i (d_axis1 pi); axis1 < 0 means single
            const std::complex<double> da(-kap[axis0] * c.imag(), kap[axis0] * c.real());
            if (axis1 >= 0) {
                const std::complex<double> db(-kap[axis1] * c.imag(), kap[axis1] * c.real());
                buf_a[idx] = {da.real() - db.imag(), da.imag() + db.real()};
            } else {
                buf_a[idx] = da;
            }
        });
        detail::execute(bwd, buf_a.data(), buf_b.data());
        for (std::size_t i = 0; i < N; ++i) buf_b[i] *= beta_dev[i];
        detail::execute(fwd, buf_b.data(), buf_a.data());
        // unpack, dealias, accumulate the divergence
        detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                     const std::array<int, 3>& km) {
            if (!accumulate) w[idx] = 0.0;
            if (3 * std::abs(km[0]) > n || 3 * std::abs(km[1]) > n || 3 * std::abs(km[2]) > n)
                return;
            const std::complex<double> a = fft_scale * buf_a[idx];
            const std::complex<double> b =
                fft_scale * std::conj(buf_a[detail::conjugate_index(g, idx)]);
            const std::complex<double> h0 = 0.5 * (a + b);
            std::complex<double> div(-kap[axis0] * h0.imag(), kap[axis0] * h0.real());
            if (axis1 >= 0) {
                const std::complex<double> h1 =
                    0.5 * std::complex<double>(a.imag() - b.imag(), b.real() - a.real());
                div += std::complex<double>(-kap[axis1] * h1.imag(), kap[axis1] * h1.real());
            }
            w[idx] += div;
        });
    };

    const double target = tol * sol.rhs_norm;
    double res = 0.0;
    for (int it = 0; it <= max_iter; ++it) {
        if (d == 2) {
            assemble_w(0, 1, false);
        } else {
            assemble_w(0, 1, false);
            assemble_w(2, -1, true);
        }
        // residual of the current iterate: div g - div(beta grad pi)
        double acc = 0.0;
        detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                     const std::array<int, 3>&) {
            const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
            const std::complex<double> r =
                rhs.coeffs[idx] - w[idx] + beta_ref * k2 * pi_hat.coeffs[idx];
            resid[idx] = r;
            if (idx != 0) acc += std::norm(r);
        });
        res = std::sqrt(vol * acc);
        sol.iterations = it;
        if (res <= target) break;
        if (it == max_iter)
            throw std::runtime_error(
                "solve_pressure: no convergence after " + std::to_string(max_iter) +
                " iterations, relative residual " + std::to_string(res / sol.rhs_norm));

        // pi += rho_ref Delta^-1 resid
        detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                     const std::array<int, 3>&) {
            const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
            if (k2 > 0.0) pi_hat.coeffs[idx] -= rho_ref / k2 * resid[idx];
        });
    }
    sol.residual = res;
    pi_hat.coeffs[0] = 0.0;
    sol.pi_hat = pi_hat;
    sol.pi = inverse_transform(pi_hat);
    return sol;
}

inline RealField solve_pressure(const RealField& rho, const VectorField& g_phys,
                                double tol = 1e-12, int max_iter = 500) {
    SpectralVectorField g_hat;
    for (const auto& c : g_phys) g_hat.push_back(forward_transform(c));
    return solve_pressure_spectral(rho, g_hat, tol, max_iter).pi;
}

namespace detail {

struct RhsOptions {
    double pressure_tol = 1e-12;
    int pressure_max_iter = 500;
    SpectralField* pressure_cache = nullptr;  // warm start, updated in place
};

struct RhsEval {
    RealField drho;
    VectorField du;
    VectorField deta;
    RealField pi;
    double grad_u_sq = 0.0;  // ||grad u||_{L2}^2 at this state
    int pressure_iterations = 0;
};

/// Shared right-hand-side pipeline for the three systems.
///   drho  = -u . grad rho
///   du    = -(u.grad)u + rho^-1 (Delta u + F - grad pi)
///   deta  = -u . grad eta_j - (d_j u).eta           (only when eta is carried)
/// All pointwise products are dealiased; du is Leray-projected.
inline RhsEval evaluate_rhs(const FlowState& s, const PhysParams& p, const RhsOptions& opt) {
    const Grid& g = s.grid();
    const int d = g.dim();
    RhsEval out;

    // spectral state
    SpectralField R;
    SpectralVectorField U(d);
    if (d == 2) {
        forward_transform2(s.rho, s.u[0], R, U[0]);
        U[1] = forward_transform(s.u[1]);
    } else {
        forward_transform2(s.rho, s.u[0], R, U[0]);
        forward_transform2(s.u[1], s.u[2], U[1], U[2]);
    }

    for (int c = 0; c < d; ++c) out.grad_u_sq += grad_l2_norm_sq(U[c]);

    // gradients in physical space
    VectorField drho_p(d, RealField(g));
    if (d == 2) {
        inverse_transform2(partial_derivative(R, 0), partial_derivative(R, 1), drho_p[0],
                           drho_p[1]);
    } else {
        inverse_transform2(partial_derivative(R, 0), partial_derivative(R, 1), drho_p[0],
                           drho_p[1]);
        drho_p[2] = inverse_transform(partial_derivative(R, 2));
    }

    std::vector<VectorField> du_p(d, VectorField(d, RealField(g)));  // du_p[j][i] = d_i u_j
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

    // density advection: drho = -u . grad rho
    {
        RealField adv(g);
        for (std::size_t i = 0; i < adv.values.size(); ++i) {
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += s.u[c].values[i] * drho_p[c].values[i];
            adv.values[i] = -acc;
        }
        SpectralField A = forward_transform(adv);
        dealias_in_place(A);
        out.drho = inverse_transform(A);
    }

    // momentum advection: A_j = (u.grad)u_j, kept spectral
    SpectralVectorField Adv(d);
    {
        VectorField a(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < a[j].values.size(); ++i) {
                double acc = 0.0;
                for (int c = 0; c < d; ++c) acc += s.u[c].values[i] * du_p[j][c].values[i];
                a[j].values[i] = acc;
            }
        if (d == 2) {
            forward_transform2(a[0], a[1], Adv[0], Adv[1]);
        } else {
            forward_transform2(a[0], a[1], Adv[0], Adv[1]);
            Adv[2] = forward_transform(a[2]);
        }
        for (int j = 0; j < d; ++j) dealias_in_place(Adv[j]);
    }

    // capillary force, physical space
    VectorField force;
    const double kappa = p.effective_kappa();
    if (kappa > 0.0) {
        SpectralField lap = laplacian(R);
        if (p.system == SystemKind::RelaxedINSK)
            lap = apply_k_alpha_sq(lap, RelaxationParam(p.alpha));
        RealField m = inverse_transform(lap);
        force.assign(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < m.values.size(); ++i)
                force[j].values[i] = -kappa * drho_p[j].values[i] * m.values[i];
        SpectralField F0, F1;
        forward_transform2(force[0], force[1], F0, F1);
        dealias_in_place(F0);
        dealias_in_place(F1);
        SpectralVectorField Fh = {F0, F1};
        if (d == 3) {
            SpectralField F2 = forward_transform(force[2]);
            dealias_in_place(F2);
            Fh.push_back(F2);
        }
        if (d == 2) {
            inverse_transform2(Fh[0], Fh[1], force[0], force[1]);
        } else {
            inverse_transform2(Fh[0], Fh[1], force[0], force[1]);
            force[2] = inverse_transform(Fh[2]);
        }
    }

    // S_j = Delta u_j + F_j in physical space
    VectorField S(d, RealField(g));
    if (d == 2) {
        inverse_transform2(laplacian(U[0]), laplacian(U[1]), S[0], S[1]);
    } else {
        inverse_transform2(laplacian(U[0]), laplacian(U[1]), S[0], S[1]);
        S[2] = inverse_transform(laplacian(U[2]));
    }
    if (!force.empty())
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < S[j].values.size(); ++i)
                S[j].values[i] += force[j].values[i];

    // g_j = rho^-1 S_j - (u.grad)u_j  (spectral, dealiased)
    RealField beta(g);
    for (std::size_t i = 0; i < beta.values.size(); ++i) beta.values[i] = 1.0 / s.rho.values[i];
    SpectralVectorField Gh(d);
    {
        VectorField bs(d, RealField(g));
        for (int j = 0; j < d; ++j)
            for (std::size_t i = 0; i < bs[j].values.size(); ++i)
                bs[j].values[i] = beta.values[i] * S[j].values[i];
        if (d == 2) {
            forward_transform2(bs[0], bs[1], Gh[0], Gh[1]);
        } else {
            forward_transform2(bs[0], bs[1], Gh[0], Gh[1]);
            Gh[2] = forward_transform(bs[2]);
        }
        for (int j = 0; j < d; ++j) {
            dealias_in_place(Gh[j]);
            for (std::size_t i = 0; i < Gh[j].coeffs.size(); ++i)
                Gh[j].coeffs[i] -= Adv[j].coeffs[i];
        }
    }

    // pressure and its contribution rho^-1 grad pi
    PressureSolution ps = solve_pressure_spectral(
        s.rho, Gh, opt.pressure_tol, opt.pressure_max_iter, opt.pressure_cache);
    out.pressure_iterations = ps.iterations;
    out.pi = ps.pi;
    if (opt.pressure_cache) *opt.pressure_cache = ps.pi_hat;

    {
        VectorField G(d, RealField(g));
        if (d == 2) {
            inverse_transform2(partial_derivative(ps.pi_hat, 0), partial_derivative(ps.pi_hat, 1),
                               G[0], G[1]);
        } else {
            inverse_transform2(partial_derivative(ps.pi_hat, 0), partial_derivative(ps.pi_hat, 1),
                               G[0], G[1]);
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

    // auxiliary gradient: deta_j = -u.grad eta_j - (d_j u).eta
    if (s.has_eta()) {
        out.deta.assign(d, RealField(g));
        for (int j = 0; j < d; ++j) {
            SpectralField Ej = forward_transform(s.eta[j]);
            VectorField de(d, RealField(g));
            if (d == 2) {
                inverse_transform2(partial_derivative(Ej, 0), partial_derivative(Ej, 1), de[0],
                                   de[1]);
            } else {
                inverse_transform2(partial_derivative(Ej, 0), partial_derivative(Ej, 1), de[0],
                                   de[1]);
                de[2] = inverse_transform(partial_derivative(Ej, 2));
            }
            RealField r(g);
            for (std::size_t i = 0; i < r.values.size(); ++i) {
                double adv = 0.0, stretch = 0.0;
                for (int c = 0; c < d; ++c) {
                    adv += s.u[c].values[i] * de[c].values[i];
                    stretch += du_p[c][j].values[i] * s.eta[c].values[i];
                }
                r.values[i] = -adv - stretch;
            }
            SpectralField Rj = forward_transform(r);
            dealias_in_place(Rj);
            out.deta[j] = inverse_transform(Rj);
        }
    }
    return out;
}

}  // namespace detail

/// -u . grad rho, dealiased.
inline RealField density_rhs(const FlowState& state) {
    const Grid& g = state.grid();
    SpectralField R = forward_transform(state.rho);
    RealField adv(g);
    for (int c = 0; c < g.dim(); ++c) {
        RealField dr = inverse_transform(partial_derivative(R, c));
        for (std::size_t i = 0; i < adv.values.size(); ++i)
            adv.values[i] -= state.u[c].values[i] * dr.values[i];
    }
    SpectralField A = forward_transform(adv);
    dealias_in_place(A);
    return inverse_transform(A);
}

/// Momentum right-hand side; divergence-free by construction.
inline VectorField momentum_rhs(const FlowState& state, const PhysParams& params) {
    detail::RhsOptions opt;
    return detail::evaluate_rhs(state, params, opt).du;
}

/// Stable step size: safety * min(advective, viscous, capillary) candidates.
/// For the local system the relaxation scale is capped by the largest
/// retained wavenumber.
inline double cfl_dt(const FlowState& state, const PhysParams& params, double safety) {
    if (!(safety > 0.0) || safety > 1.0)
        throw std::invalid_argument("cfl_dt: safety must be in (0, 1]");
    const Grid& g = state.grid();
    const double eps = 1e-12;
    const double dx = g.dx();

    double umax_sq = 0.0;
    for (std::size_t i = 0; i < state.rho.values.size(); ++i) {
        double m = 0.0;
        for (int c = 0; c < g.dim(); ++c) m += state.u[c].values[i] * state.u[c].values[i];
        umax_sq = std::max(umax_sq, m);
    }
    const double advective = dx / (std::sqrt(umax_sq) + eps);
    const double viscous = state.rho.min() * dx * dx / (2.0 * g.dim());

    double capillary = 1.0 / eps;
    const double kappa = params.effective_kappa();
    if (kappa > 0.0) {
        SpectralField R = forward_transform(state.rho);
        double grad_max_sq = 0.0;
        VectorField dr;
        for (int c = 0; c < g.dim(); ++c)
            dr.push_back(inverse_transform(partial_derivative(R, c)));
        for (std::size_t i = 0; i < state.rho.values.size(); ++i) {
            double m = 0.0;
            for (int c = 0; c < g.dim(); ++c) m += dr[c].values[i] * dr[c].values[i];
            grad_max_sq = std::max(grad_max_sq, m);
        }
        const double scale = params.system == SystemKind::LocalINSK
                                 ? g.max_retained_wavenumber()
                                 : params.alpha;
        capillary = 1.0 / (std::sqrt(kappa) * scale * std::sqrt(grad_max_sq) + eps);
    }
    return safety * std::min({advective, viscous, capillary});
}

namespace detail {

inline void check_state_valid(const FlowState& s, double t) {
    if (!s.rho.all_finite())
        throw std::runtime_error("rk4_step: density lost finiteness at t = " + std::to_string(t));
    const double rmin = s.rho.min();
    if (!(rmin > 0.0))
        throw std::runtime_error("rk4_step: density positivity lost at t = " + std::to_string(t) +
                                 " (min rho = " + std::to_string(rmin) + ")");
    for (const auto& c : s.u)
        if (!c.all_finite())
            throw std::runtime_error("rk4_step: velocity lost finiteness at t = " +
                                     std::to_string(t));
}

inline void project_velocity(FlowState& s) {
    const Grid& g = s.grid();
    SpectralVectorField U(g.dim());
    if (g.dim() == 2) {
        forward_transform2(s.u[0], s.u[1], U[0], U[1]);
    } else {
        forward_transform2(s.u[0], s.u[1], U[0], U[1]);
        U[2] = forward_transform(s.u[2]);
    }
    U = leray_project(U);
    if (g.dim() == 2) {
        inverse_transform2(U[0], U[1], s.u[0], s.u[1]);
    } else {
        inverse_transform2(U[0], U[1], s.u[0], s.u[1]);
        s.u[2] = inverse_transform(U[2]);
    }
}

inline FlowState rk4_step_impl(const FlowState& state, double dt, const PhysParams& params,
                               const RhsOptions& opt) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    using detail::FlowDelta;
    auto eval = [&](const FlowState& y) {
        RhsEval e = evaluate_rhs(y, params, opt);
        FlowDelta del;
        del.drho = std::move(e.drho);
        del.du = std::move(e.du);
        del.deta = std::move(e.deta);
        del.ddissipation = e.grad_u_sq;
        return std::make_pair(std::move(del), std::move(e.pi));
    };

    auto [k1, pi1] = eval(state);
    FlowState y2 = state_plus(state, 0.5 * dt, k1);
    auto [k2, pi2] = eval(y2);
    FlowState y3 = state_plus(state, 0.5 * dt, k2);
    auto [k3, pi3] = eval(y3);
    FlowState y4 = state_plus(state, dt, k3);
    auto [k4, pi4] = eval(y4);

    FlowState next = state_plus(state, dt / 6.0, k1);
    next = state_plus(next, dt / 3.0, k2);
    next = state_plus(next, dt / 3.0, k3);
    next = state_plus(next, dt / 6.0, k4);
    next.time = state.time + dt;
    next.pi = std::move(pi4);  // pressure from the final stage evaluation
    project_velocity(next);
    check_state_valid(next, next.time);
    return next;
}

}  // namespace detail

/// Classical four-stage explicit step of (rho, u[, eta]); the velocity is
/// re-projected after the step and the dissipation integral advances with the
/// same tableau.
inline FlowState rk4_step(const FlowState& state, double dt, const PhysParams& params) {
    detail::RhsOptions opt;
    SpectralField cache;
    opt.pressure_cache = &cache;
    return detail::rk4_step_impl(state, dt, params, opt);
}

struct DtPolicy {
    enum class Kind { Fixed, Cfl } kind = Kind::Cfl;
    double dt = 0.0;       // Fixed: target step
    double safety = 0.5;   // Cfl: safety factor

    static DtPolicy fixed(double dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("DtPolicy: dt must be positive");
        return {Kind::Fixed, dt, 0.0};
    }
    static DtPolicy cfl(double safety) { return {Kind::Cfl, 0.0, safety}; }
};

struct SimOptions {
    int frames = 32;                // output intervals over [0, t_end]
    double blowup_ceiling = 1e6;    // on ||u||_{H3} and ||rho - rho_bar||_{H4}
    double pressure_tol = 1e-12;
    int pressure_max_iter = 500;
};

struct Trajectory {
    std::vector<FlowState> frames;
    double rho_min_seen = 0.0;  // over every accepted step, not just frames
    double rho_max_seen = 0.0;
    bool blown_up = false;
    std::string blowup_message;
    long steps = 0;
    double dt_nominal = 0.0;
};

/// March the system to t_end, emitting frames at uniformly spaced output
/// times.  Blow-up (a tracked Sobolev norm beyond the ceiling, or a failed
/// step) terminates early with the partial trajectory flagged.
inline Trajectory simulate(const FlowState& init, const PhysParams& params, double t_end,
                           const DtPolicy& policy, const SimOptions& options = {}) {
    params.validate();
    if (t_end < 0.0) throw std::invalid_argument("simulate: t_end must be >= 0");
    if (!(init.rho.min() > 0.0))
        throw std::invalid_argument("simulate: initial density must be strictly positive");

    Trajectory traj;
    traj.rho_min_seen = init.rho.min();
    traj.rho_max_seen = init.rho.max();
    traj.frames.push_back(init);
    traj.frames.front().time = 0.0;
    if (t_end == 0.0) return traj;

    const int nframes = std::max(1, options.frames);
    detail::RhsOptions ropt;
    SpectralField pressure_cache;
    ropt.pressure_tol = options.pressure_tol;
    ropt.pressure_max_iter = options.pressure_max_iter;
    ropt.pressure_cache = &pressure_cache;

    FlowState cur = traj.frames.front();
    auto blowup_norms_ok = [&](const FlowState& s, std::string& msg) {
        SpectralField R = forward_transform(s.rho);
        R.coeffs[0] -= params.rho_bar;
        const double nr = sobolev_norm(R, 4.0);
        double nu_sq = 0.0;
        for (const auto& c : s.u) {
            const double nc = sobolev_norm(forward_transform(c), 3.0);
            nu_sq += nc * nc;
        }
        const double nu = std::sqrt(nu_sq);
        if (nr > options.blowup_ceiling || nu > options.blowup_ceiling) {
            msg = "blow-up: ||rho - rho_bar||_H4 = " + std::to_string(nr) +
                  ", ||u||_H3 = " + std::to_string(nu) + " at t = " + std::to_string(s.time);
            return false;
        }
        return true;
    };

    for (int f = 1; f <= nframes; ++f) {
        const double t_target = t_end * f / nframes;
        const double interval = t_target - cur.time;
        double dt_target;
        if (policy.kind == DtPolicy::Kind::Fixed) {
            dt_target = policy.dt;
        } else {
            dt_target = cfl_dt(cur, params, policy.safety);
        }
        traj.dt_nominal = dt_target;
        const long m = std::max<long>(1, static_cast<long>(
            std::ceil(interval / dt_target * (1.0 - 1e-12))));
        const double dt = interval / static_cast<double>(m);
        for (long k = 0; k < m; ++k) {
            try {
                cur = detail::rk4_step_impl(cur, dt, params, ropt);
            } catch (const std::runtime_error& e) {
                traj.blown_up = true;
                traj.blowup_message = e.what();
                return traj;
            }
            ++traj.steps;
            traj.rho_min_seen = std::min(traj.rho_min_seen, cur.rho.min());
            traj.rho_max_seen = std::max(traj.rho_max_seen, cur.rho.max());
        }
        cur.time = t_target;  // suppress accumulated roundoff in the clock
        std::string msg;
        if (!blowup_norms_ok(cur, msg)) {
            traj.blown_up = true;
            traj.blowup_message = msg;
            traj.frames.push_back(cur);
            return traj;
        }
        traj.frames.push_back(cur);
    }
    return traj;
}

}  // namespace nsk
