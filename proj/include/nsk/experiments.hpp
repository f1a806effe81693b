// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsk/dynamics.hpp"
#include "nsk/nonlocal.hpp"
#include "nsk/spectral_ops.hpp"

namespace nsk {

// ---------------------------------------------------------------------------
// tables and fits

struct ConvergenceRow {
    double parameter = 0.0;
    std::vector<double> errors;
    bool valid = true;
};

struct ConvergenceTable {
    std::string parameter_name;              // "alpha" or "kappa"
    std::vector<std::string> error_columns;  // column names matching Row.errors
    std::vector<ConvergenceRow> rows;
    std::string reference;                   // descriptor of the reference run
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Least-squares slope of log(error) against log(parameter) for one column.
/// Rows flagged invalid and rows with nonpositive error are dropped (with a
/// warning); at least three usable points are required.
inline RateFit fit_rate(const ConvergenceTable& table, const std::string& column) {
    auto cit = std::find(table.error_columns.begin(), table.error_columns.end(), column);
    if (cit == table.error_columns.end())
        throw std::invalid_argument("fit_rate: unknown column " + column);
    const std::size_t ci = static_cast<std::size_t>(cit - table.error_columns.begin());

    std::vector<double> lx, ly;
    for (const auto& row : table.rows) {
        if (!row.valid) continue;
        const double e = row.errors.at(ci);
        if (!(e > 0.0) || !std::isfinite(e)) {
            std::cerr << "fit_rate: dropping " << table.parameter_name << " = "
                      << row.parameter << " (" << column << " = " << e << ")\n";
            continue;
        }
        lx.push_back(std::log(row.parameter));
        ly.push_back(std::log(e));
    }
    if (lx.size() < 3)
        throw std::invalid_argument("fit_rate: needs at least 3 usable rows, got " +
                                    std::to_string(lx.size()));

    const double n = static_cast<double>(lx.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    RateFit fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0.0, ss_tot = 0.0;
    const double ybar = sy / n;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double fy = fit.intercept + fit.slope * lx[i];
        ss_res += (ly[i] - fy) * (ly[i] - fy);
        ss_tot += (ly[i] - ybar) * (ly[i] - ybar);
    }
    fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
    return fit;
}

// ---------------------------------------------------------------------------
// norms and energy

/// sqrt(sum_c ||F_c||_{H^s}^2) for a velocity-like field.
inline double vector_sobolev_norm(const SpectralVectorField& F, double s) {
    double acc = 0.0;
    for (const auto& c : F) {
        const double n = sobolev_norm(c, s);
        acc += n * n;
    }
    return std::sqrt(acc);
}

/// ||grad f||_{H^s}^2 = sum_k |kappa|^2 (1+|kappa|^2)^s |f_k|^2 L^dim.
inline double grad_sobolev_norm_sq(const SpectralField& F, double s) {
    double acc = 0.0;
    detail::for_each_mode(F.grid, [&](std::size_t idx, const std::array<double, 3>& kap,
                                      const std::array<int, 3>&) {
        const double k2 = kap[0] * kap[0] + kap[1] * kap[1] + kap[2] * kap[2];
        const double w = (s == 0.0) ? k2 : k2 * std::pow(1.0 + k2, s);
        acc += w * std::norm(F.coeffs[idx]);
    });
    return std::pow(F.grid.length(), F.grid.dim()) * acc;
}

/// Total energy of the system variant:
///   E = 1/2 int rho |u|^2 dx + (kappa/2) ||k_alpha grad rho||_{L2}^2
/// with k_alpha replaced by the identity for the local system and the kappa
/// term absent for Navier-Stokes.
inline double total_energy(const FlowState& s, const PhysParams& p) {
    const Grid& g = s.grid();
    double kin = 0.0;
    for (std::size_t i = 0; i < s.rho.values.size(); ++i) {
        double usq = 0.0;
        for (const auto& c : s.u) usq += c.values[i] * c.values[i];
        kin += s.rho.values[i] * usq;
    }
    kin *= 0.5 * std::pow(g.dx(), g.dim());
    if (p.system == SystemKind::NavierStokes || p.kappa == 0.0) return kin;

    SpectralField R = forward_transform(s.rho);
    const double a2 = p.alpha * p.alpha;
    const int nyq = -g.n() / 2;
    double cap = 0.0;
    detail::for_each_mode(g, [&](std::size_t idx, const std::array<double, 3>& kap,
                                 const std::array<int, 3>& km) {
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a)
            if (km[a] != nyq) k2 += kap[a] * kap[a];
        const double mult = p.system == SystemKind::RelaxedINSK ? a2 / (a2 + k2) : 1.0;
        cap += mult * k2 * std::norm(R.coeffs[idx]);
    });
    cap *= std::pow(g.length(), g.dim());
    return kin + 0.5 * p.kappa * cap;
}

struct EnergyReport {
    std::vector<double> times;
    std::vector<double> energy;
    std::vector<double> dissipation;  // cumulative int ||grad u||^2
    std::vector<double> residual;     // E(t) - E(0) + dissipation(t)
    bool accumulated = false;  // true: integrator-carried; false: trapezoid
};

/// Energy identity bookkeeping along a trajectory.  Trajectories produced by
/// simulate() carry the dissipation integral accumulated by the integrator
/// itself (fourth-order accurate); for bare frame sequences the cumulative
/// trapezoid of ||grad u||^2 over the frames is used instead.
inline EnergyReport energy_report(const Trajectory& traj, const PhysParams& params) {
    EnergyReport rep;
    if (traj.frames.empty()) return rep;
    rep.accumulated = traj.steps > 0;

    std::vector<double> grad_sq;
    if (!rep.accumulated) {
        grad_sq.reserve(traj.frames.size());
        for (const auto& f : traj.frames) {
            double acc = 0.0;
            for (const auto& c : f.u) acc += grad_l2_norm_sq(forward_transform(c));
            grad_sq.push_back(acc);
        }
    }

    const double d0 = traj.frames.front().dissipation;
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        rep.times.push_back(traj.frames[i].time);
        rep.energy.push_back(total_energy(traj.frames[i], params));
        if (rep.accumulated) {
            rep.dissipation.push_back(traj.frames[i].dissipation - d0);
        } else if (i == 0) {
            rep.dissipation.push_back(0.0);
        } else {
            const double dt = rep.times[i] - rep.times[i - 1];
            rep.dissipation.push_back(rep.dissipation[i - 1] +
                                      0.5 * dt * (grad_sq[i] + grad_sq[i - 1]));
        }
        rep.residual.push_back(rep.energy[i] - rep.energy.front() + rep.dissipation[i]);
    }
    return rep;
}

struct MaxPrincipleReport {
    double rho_min = 0.0;   // over the whole trajectory
    double rho_max = 0.0;
    double overshoot = 0.0;  // beyond the initial bounds, 0 if none
};

inline MaxPrincipleReport max_principle_report(const Trajectory& traj) {
    if (traj.frames.empty()) throw std::invalid_argument("max_principle_report: empty trajectory");
    MaxPrincipleReport rep;
    if (traj.steps > 0) {
        rep.rho_min = traj.rho_min_seen;
        rep.rho_max = traj.rho_max_seen;
    } else {
        rep.rho_min = traj.frames.front().rho.min();
        rep.rho_max = traj.frames.front().rho.max();
        for (const auto& f : traj.frames) {
            rep.rho_min = std::min(rep.rho_min, f.rho.min());
            rep.rho_max = std::max(rep.rho_max, f.rho.max());
        }
    }
    const double m0 = traj.frames.front().rho.min();
    const double M0 = traj.frames.front().rho.max();
    rep.overshoot = std::max({m0 - rep.rho_min, rep.rho_max - M0, 0.0});
    return rep;
}

struct OrderParameterReport {
    double error = 0.0;  // sup_t ||k_alpha^2 rho - rho||_{H^{2+l}}
    double bound = 0.0;  // alpha^{-(2-l)} sup_t ||rho||_{H^4}
};

/// The order-parameter gap c^alpha - rho^alpha and its multiplier bound.  The
/// bound holds mode-by-mode, so violation beyond roundoff is a logic error.
inline OrderParameterReport order_parameter_error(const Trajectory& traj, double alpha,
                                                  double l) {
    if (!(l >= 0.0 && l <= 2.0))
        throw std::invalid_argument("order_parameter_error: l must lie in [0,2]");
    RelaxationParam a(alpha);
    OrderParameterReport rep;
    for (const auto& f : traj.frames) {
        SpectralField R = forward_transform(f.rho);
        rep.error = std::max(rep.error, sobolev_norm(relaxation_residual(R, a), 2.0 + l));
        rep.bound = std::max(rep.bound, sobolev_norm(R, 4.0));
    }
    rep.bound *= std::pow(alpha, -(2.0 - l));
    if (rep.error > rep.bound * (1.0 + 1e-10))
        throw std::logic_error("order_parameter_error: multiplier bound violated");
    return rep;
}

struct NormTrack {
    std::vector<double> times;
    std::vector<double> rho_h4;            // ||rho - mean||_{H^4}
    std::vector<double> u_h3;              // ||u||_{H^3}
    std::vector<double> cum_grad_u_h3_sq;  // int_0^t ||grad u||_{H^3}^2
    std::vector<double> cum_dtu_h2_sq;     // int_0^t ||d_t u||_{H^2}^2
    std::vector<double> m_t;               // the nondecreasing majorant M(t)
};

/// The ingredients of the norm functional M(t); time derivatives by central
/// differences over the frames, integrals by the trapezoid rule.
inline NormTrack norm_tracker(const Trajectory& traj) {
    NormTrack tr;
    const std::size_t n = traj.frames.size();
    if (n == 0) return tr;

    std::vector<double> grad_h3_sq(n);
    std::vector<SpectralVectorField> U(n);
    for (std::size_t i = 0; i < n; ++i) {
        const FlowState& f = traj.frames[i];
        tr.times.push_back(f.time);
        SpectralField R = forward_transform(f.rho);
        R.coeffs[0] = 0.0;
        tr.rho_h4.push_back(sobolev_norm(R, 4.0));
        for (const auto& c : f.u) U[i].push_back(forward_transform(c));
        tr.u_h3.push_back(vector_sobolev_norm(U[i], 3.0));
        double acc = 0.0;
        for (const auto& c : U[i]) acc += grad_sobolev_norm_sq(c, 3.0);
        grad_h3_sq[i] = acc;
    }

    std::vector<double> dtu_h2_sq(n, 0.0);
    if (n >= 2) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
            const double dt = tr.times[hi] - tr.times[lo];
            double acc = 0.0;
            for (std::size_t c = 0; c < U[i].size(); ++c) {
                SpectralField diff(U[i][c].grid);
                for (std::size_t m = 0; m < diff.coeffs.size(); ++m)
                    diff.coeffs[m] = (U[hi][c].coeffs[m] - U[lo][c].coeffs[m]) / dt;
                const double nn = sobolev_norm(diff, 2.0);
                acc += nn * nn;
            }
            dtu_h2_sq[i] = acc;
        }
    }

    const double m0 = 1.0 + tr.rho_h4.front() * tr.rho_h4.front() +
                      tr.u_h3.front() * tr.u_h3.front();
    double cg = 0.0, cd = 0.0, cm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double dt = tr.times[i] - tr.times[i - 1];
            cg += 0.5 * dt * (grad_h3_sq[i] + grad_h3_sq[i - 1]);
            cd += 0.5 * dt * (dtu_h2_sq[i] + dtu_h2_sq[i - 1]);
            auto integrand = [&](std::size_t j) {
                const double v = 1.0 + tr.rho_h4[j] * tr.rho_h4[j] + tr.u_h3[j] * tr.u_h3[j];
                return v * v;
            };
            cm += 0.5 * dt * (integrand(i) + integrand(i - 1));
        }
        tr.cum_grad_u_h3_sq.push_back(cg);
        tr.cum_dtu_h2_sq.push_back(cd);
        tr.m_t.push_back(m0 + cm);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// parameter sweeps

struct SweepBase {
    FlowState init;
    PhysParams params;     // kappa/alpha give the sweep's fixed values
    double t_end = 0.25;
    int frames = 32;
    double safety = 0.5;
    double dt = 0.0;       // 0: derived from the stiffest sweep member
    double pressure_tol = 1e-12;
    double blowup_ceiling = 1e6;
};

namespace detail {

inline Trajectory run_member(const SweepBase& base, const PhysParams& p, double dt) {
    SimOptions opt;
    opt.frames = base.frames;
    opt.pressure_tol = base.pressure_tol;
    opt.blowup_ceiling = base.blowup_ceiling;
    return simulate(base.init, p, base.t_end, DtPolicy::fixed(dt), opt);
}

inline void require_strictly_monotone(const std::vector<double>& v, const char* what) {
    if (v.size() < 2) throw std::invalid_argument(std::string(what) + ": needs >= 2 values");
    const bool inc = v[1] > v[0];
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const bool ok = inc ? v[i + 1] > v[i] : v[i + 1] < v[i];
        if (!ok) throw std::invalid_argument(std::string(what) + ": values must be strictly monotone");
    }
}

// sup over shared output frames of the rho and u difference norms
inline void sup_errors(const Trajectory& a, const Trajectory& b,
                       const std::vector<double>& rho_orders,
                       const std::vector<double>& u_orders, std::vector<double>& out) {
    out.assign(rho_orders.size() + u_orders.size(), 0.0);
    const std::size_t nf = std::min(a.frames.size(), b.frames.size());
    for (std::size_t i = 0; i < nf; ++i) {
        SpectralField dr(a.frames[i].grid());
        {
            SpectralField ra = forward_transform(a.frames[i].rho);
            SpectralField rb = forward_transform(b.frames[i].rho);
            for (std::size_t m = 0; m < dr.coeffs.size(); ++m)
                dr.coeffs[m] = ra.coeffs[m] - rb.coeffs[m];
        }
        SpectralVectorField du;
        for (std::size_t c = 0; c < a.frames[i].u.size(); ++c) {
            SpectralField ua = forward_transform(a.frames[i].u[c]);
            SpectralField ub = forward_transform(b.frames[i].u[c]);
            for (std::size_t m = 0; m < ua.coeffs.size(); ++m)
                ua.coeffs[m] -= ub.coeffs[m];
            du.push_back(std::move(ua));
        }
        for (std::size_t j = 0; j < rho_orders.size(); ++j)
            out[2 * j] = std::max(out[2 * j], sobolev_norm(dr, rho_orders[j]));
        for (std::size_t j = 0; j < u_orders.size(); ++j)
            out[2 * j + 1] = std::max(out[2 * j + 1], vector_sobolev_norm(du, u_orders[j]));
    }
}

}  // namespace detail

/// Relaxation sweep against the local-system reference on the shared mesh.
/// Errors are the unsquared sup-in-time norms: rho in H^{2+l}, u in H^{1+l}.
inline ConvergenceTable sweep_alpha(const SweepBase& base, const std::vector<double>& alphas,
                                    const std::vector<double>& l_values = {0.0, 1.0, 2.0}) {
    detail::require_strictly_monotone(alphas, "sweep_alpha");
    base.params.validate();

    double dt = base.dt;
    if (dt <= 0.0) {
        PhysParams pl = base.params;
        pl.system = SystemKind::LocalINSK;
        dt = cfl_dt(base.init, pl, base.safety);
        for (double a : alphas) {
            PhysParams p = base.params;
            p.system = SystemKind::RelaxedINSK;
            p.alpha = a;
            dt = std::min(dt, cfl_dt(base.init, p, base.safety));
        }
    }

    std::vector<std::future<Trajectory>> runs;
    for (double a : alphas) {
        PhysParams p = base.params;
        p.system = SystemKind::RelaxedINSK;
        p.alpha = a;
        runs.push_back(std::async(std::launch::async,
                                  [&, p, dt] { return detail::run_member(base, p, dt); }));
    }
    PhysParams pref = base.params;
    pref.system = SystemKind::LocalINSK;
    Trajectory reference = detail::run_member(base, pref, dt);

    ConvergenceTable table;
    table.parameter_name = "alpha";
    for (double l : l_values) {
        const int li = static_cast<int>(l);
        table.error_columns.push_back("rho_err_l" + std::to_string(li));
        table.error_columns.push_back("u_err_l" + std::to_string(li));
    }
    table.reference = "local_insk(kappa=" + std::to_string(base.params.kappa) +
                      ", n=" + std::to_string(base.init.grid().n()) +
                      ", dt=" + std::to_string(dt) + ")";

    std::vector<double> rho_orders, u_orders;
    for (double l : l_values) {
        rho_orders.push_back(2.0 + l);
        u_orders.push_back(1.0 + l);
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        Trajectory traj = runs[i].get();
        ConvergenceRow row;
        row.parameter = alphas[i];
        if (traj.blown_up || reference.blown_up) {
            row.valid = false;
            row.errors.assign(2 * l_values.size(), std::nan(""));
        } else {
            detail::sup_errors(traj, reference, rho_orders, u_orders, row.errors);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

/// Capillarity sweep against the Navier-Stokes reference; sup-in-time H^3
/// errors of rho and u.
inline ConvergenceTable sweep_kappa(const SweepBase& base, const std::vector<double>& kappas) {
    detail::require_strictly_monotone(kappas, "sweep_kappa");
    base.params.validate();

    double dt = base.dt;
    if (dt <= 0.0) {
        PhysParams pn = base.params;
        pn.system = SystemKind::NavierStokes;
        dt = cfl_dt(base.init, pn, base.safety);
        for (double k : kappas) {
            PhysParams p = base.params;
            p.system = SystemKind::RelaxedINSK;
            p.kappa = k;
            dt = std::min(dt, cfl_dt(base.init, p, base.safety));
        }
    }

    std::vector<std::future<Trajectory>> runs;
    for (double k : kappas) {
        PhysParams p = base.params;
        p.system = SystemKind::RelaxedINSK;
        p.kappa = k;
        runs.push_back(std::async(std::launch::async,
                                  [&, p, dt] { return detail::run_member(base, p, dt); }));
    }
    PhysParams pref = base.params;
    pref.system = SystemKind::NavierStokes;
    Trajectory reference = detail::run_member(base, pref, dt);

    ConvergenceTable table;
    table.parameter_name = "kappa";
    table.error_columns = {"rho_err_h3", "u_err_h3"};
    table.reference = "navier_stokes(alpha=" + std::to_string(base.params.alpha) +
                      ", n=" + std::to_string(base.init.grid().n()) +
                      ", dt=" + std::to_string(dt) + ")";

    for (std::size_t i = 0; i < kappas.size(); ++i) {
        Trajectory traj = runs[i].get();
        ConvergenceRow row;
        row.parameter = kappas[i];
        if (traj.blown_up || reference.blown_up) {
            row.valid = false;
            row.errors.assign(2, std::nan(""));
        } else {
            detail::sup_errors(traj, reference, {3.0}, {3.0}, row.errors);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace nsk
