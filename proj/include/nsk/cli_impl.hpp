// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsk/io.hpp"
#include "nsk/ops_check.hpp"
#include "nsk/picard.hpp"

namespace nsk {
namespace detail {

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::filesystem::path prepare_out_dir(const RunConfig& cfg, const std::string& cli_out) {
    std::filesystem::path dir = !cli_out.empty()  ? std::filesystem::path(cli_out)
                                : !cfg.out_dir.empty() ? std::filesystem::path(cfg.out_dir)
                                                       : std::filesystem::path(default_output_root());
    std::filesystem::create_directories(dir);
    return dir;
}

inline double wall_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double frame_div_l2(const FlowState& s) {
    SpectralVectorField U;
    for (const auto& c : s.u) U.push_back(forward_transform(c));
    return l2_norm(divergence(U));
}

inline std::vector<double> frame_momentum(const FlowState& s) {
    const double cell = std::pow(s.grid().dx(), s.grid().dim());
    std::vector<double> m(s.u.size(), 0.0);
    for (std::size_t c = 0; c < s.u.size(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.rho.values.size(); ++i)
            acc += s.rho.values[i] * s.u[c].values[i];
        m[c] = acc * cell;
    }
    return m;
}

inline int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    FlowState init = initial_state(cfg);
    const PhysParams params = cfg.params();
    const DtPolicy policy = cfg.dt_policy == "fixed" ? DtPolicy::fixed(cfg.dt)
                                                     : DtPolicy::cfl(cfg.safety);
    SimOptions opt;
    opt.frames = cfg.frames;
    opt.blowup_ceiling = cfg.blowup_ceiling;
    opt.pressure_tol = cfg.pressure_tol;
    Trajectory traj = simulate(init, params, cfg.t_end, policy, opt);

    // trajectory fields
    char name[64];
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        const FlowState& f = traj.frames[i];
        std::snprintf(name, sizeof name, "rho_%04zu.nskf", i);
        write_field(f.rho, dir / name);
        for (std::size_t c = 0; c < f.u.size(); ++c) {
            std::snprintf(name, sizeof name, "u%zu_%04zu.nskf", c, i);
            write_field(f.u[c], dir / name);
        }
        std::snprintf(name, sizeof name, "pi_%04zu.nskf", i);
        write_field(f.pi, dir / name);
    }

    EnergyReport er = energy_report(traj, params);
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < er.times.size(); ++i)
            rows.push_back({er.times[i], er.energy[i], er.dissipation[i], er.residual[i]});
        write_csv(dir / "energy.csv", {"time", "energy", "dissipation", "residual"}, rows);
    }
    NormTrack tr = norm_tracker(traj);
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            rows.push_back({tr.times[i], tr.rho_h4[i], tr.u_h3[i], tr.cum_grad_u_h3_sq[i],
                            tr.cum_dtu_h2_sq[i], tr.m_t[i]});
        write_csv(dir / "norms.csv",
                  {"time", "rho_h4", "u_h3", "cum_grad_u_h3_sq", "cum_dtu_h2_sq", "m_t"}, rows);
    }

    MaxPrincipleReport mp = max_principle_report(traj);
    double max_div = 0.0, drift = 0.0, max_resid = 0.0;
    const std::vector<double> m0 = frame_momentum(traj.frames.front());
    double p_ref = 0.0;
    {
        const FlowState& f0 = traj.frames.front();
        const double cell = std::pow(f0.grid().dx(), f0.grid().dim());
        for (std::size_t i = 0; i < f0.rho.values.size(); ++i) {
            double m = 0.0;
            for (const auto& c : f0.u) m += std::abs(c.values[i]);
            p_ref += f0.rho.values[i] * m * cell;
        }
    }
    for (std::size_t i = 0; i < traj.frames.size(); ++i) {
        max_div = std::max(max_div, frame_div_l2(traj.frames[i]));
        const std::vector<double> m = frame_momentum(traj.frames[i]);
        for (std::size_t c = 0; c < m.size(); ++c)
            drift = std::max(drift, std::abs(m[c] - m0[c]) / std::max(p_ref, 1e-300));
        max_resid = std::max(max_resid, std::abs(er.residual[i]));
    }

    const int status = traj.blown_up ? 1 : 0;
    nlohmann::json monitors{{"steps", traj.steps},
                            {"frames", traj.frames.size()},
                            {"blown_up", traj.blown_up},
                            {"blowup_message", traj.blowup_message},
                            {"rho_min", mp.rho_min},
                            {"rho_max", mp.rho_max},
                            {"density_overshoot", mp.overshoot},
                            {"max_div_u_l2", max_div},
                            {"momentum_drift_rel", drift},
                            {"max_energy_residual", max_resid},
                            {"dissipation_accumulated", er.accumulated}};
    write_manifest(dir, cfg, monitors, status, wall_since(t0));
    if (traj.blown_up) std::cerr << "simulate: " << traj.blowup_message << "\n";
    return status;
}

inline nlohmann::json fits_json(const ConvergenceTable& table) {
    nlohmann::json fits = nlohmann::json::object();
    for (const auto& col : table.error_columns) {
        try {
            const RateFit f = fit_rate(table, col);
            fits[col] = {{"slope", f.slope},
                         {"intercept", f.intercept},
                         {"r_squared", f.r_squared}};
        } catch (const std::invalid_argument& e) {
            std::cerr << "rate fit skipped for " << col << ": " << e.what() << "\n";
        }
    }
    return fits;
}

inline void write_table_csv(const ConvergenceTable& table, const std::filesystem::path& path) {
    std::vector<std::string> cols = {"parameter"};
    cols.insert(cols.end(), table.error_columns.begin(), table.error_columns.end());
    std::vector<std::vector<double>> rows;
    for (const auto& r : table.rows) {
        std::vector<double> row = {r.parameter};
        row.insert(row.end(), r.errors.begin(), r.errors.end());
        rows.push_back(std::move(row));
    }
    write_csv(path, cols, rows);
}

inline int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& dir, bool alpha_sweep,
                     const std::vector<double>& values, const std::vector<double>& l_values) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepBase base;
    base.init = initial_state(cfg);
    base.params = cfg.params();
    base.t_end = cfg.t_end;
    base.frames = cfg.frames;
    base.safety = cfg.safety;
    base.dt = cfg.dt_policy == "fixed" ? cfg.dt : 0.0;
    base.pressure_tol = cfg.pressure_tol;
    base.blowup_ceiling = cfg.blowup_ceiling;

    ConvergenceTable table = alpha_sweep ? sweep_alpha(base, values, l_values)
                                         : sweep_kappa(base, values);
    write_table_csv(table, dir / "table.csv");
    nlohmann::json fits = fits_json(table);
    {
        std::ofstream out(dir / "rate_fit.json", std::ios::trunc);
        out << fits.dump(2) << "\n";
    }
    bool any_invalid = false;
    for (const auto& r : table.rows) any_invalid |= !r.valid;
    nlohmann::json monitors{{"reference", table.reference},
                            {"rows", table.rows.size()},
                            {"invalid_rows", any_invalid},
                            {"fits", fits}};
    const int status = any_invalid ? 1 : 0;
    write_manifest(dir, cfg, monitors, status, wall_since(t0));
    return status;
}

inline int cmd_picard(const RunConfig& cfg, const std::filesystem::path& dir, double T,
                      double tol, int max_iter) {
    const auto t0 = std::chrono::steady_clock::now();
    FlowState init = initial_state(cfg);
    auto [fixed_point, report] = picard_solve(init, cfg.params(), T, tol, max_iter,
                                              cfg.dt_policy == "fixed" ? cfg.dt : 0.0,
                                              cfg.pressure_tol);
    {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < report.x_sequence.size(); ++i)
            rows.push_back({static_cast<double>(i + 1), report.x_sequence[i],
                            i > 0 ? report.ratios[i - 1] : std::nan("")});
        write_csv(dir / "contraction.csv", {"iteration", "x_sup", "ratio"}, rows);
    }
    const double consistency = eta_consistency(fixed_point);
    const int status = report.converged ? 0 : 1;
    nlohmann::json monitors{{"iterations", report.iterations},
                            {"converged", report.converged},
                            {"non_contraction", report.non_contraction},
                            {"final_x_sup",
                             report.x_sequence.empty() ? 0.0 : report.x_sequence.back()},
                            {"eta_consistency_l2", consistency},
                            {"dt", fixed_point.dt},
                            {"mesh_steps", fixed_point.steps()}};
    write_manifest(dir, cfg, monitors, status, wall_since(t0));
    if (!report.converged)
        std::cerr << "picard: not converged after " << report.iterations << " iterations"
                  << (report.non_contraction ? " (non-contraction flagged)" : "") << "\n";
    return status;
}

inline int cmd_check_ops(int n, double alpha, int trials, std::uint64_t seed, int dim) {
    OpsCheckReport rep = check_operator_suite(n, alpha, trials, seed, dim);
    std::printf("operator suite: n = %d, alpha = %g, trials = %d\n", n, alpha, trials);
    for (const auto& line : rep.lines()) std::printf("  %s\n", line.c_str());
    std::printf("%s\n", rep.all_pass() ? "ALL PASS" : "FAILURES PRESENT");
    return rep.all_pass() ? 0 : 1;
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args) {
    CLI::App app{"pseudo-spectral solver for the relaxed incompressible "
                 "Navier-Stokes-Korteweg system and its limits"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<double> alphas, kappas, l_values = {0.0, 1.0, 2.0};
    double T = 0.05, tol = 1e-8;
    int max_iter = 15;
    int ops_n = 64, ops_trials = 100, ops_dim = 2;
    double ops_alpha = 8.0;
    std::uint64_t ops_seed = 2024;

    CLI::App* sim = app.add_subcommand("simulate", "integrate one configuration");
    sim->add_option("--config", config_path, "key = value config file")->required();
    sim->add_option("--out", out_dir, "output directory");

    CLI::App* swa = app.add_subcommand("sweep-alpha",
                                       "relaxation sweep against the local-system reference");
    swa->add_option("--config", config_path)->required();
    swa->add_option("--alphas", alphas, "comma-separated relaxation values")
        ->required()
        ->delimiter(',');
    swa->add_option("--l", l_values, "Sobolev offsets, subset of 0,1,2")->delimiter(',');
    swa->add_option("--out", out_dir);

    CLI::App* swk = app.add_subcommand("sweep-kappa",
                                       "capillarity sweep against the Navier-Stokes reference");
    swk->add_option("--config", config_path)->required();
    swk->add_option("--kappas", kappas, "comma-separated capillarity values")
        ->required()
        ->delimiter(',');
    swk->add_option("--out", out_dir);

    CLI::App* pic = app.add_subcommand("picard", "linearized iteration diagnostics");
    pic->add_option("--config", config_path)->required();
    pic->add_option("--T", T, "horizon");
    pic->add_option("--tol", tol, "target sup_t X^n");
    pic->add_option("--max-iter", max_iter);
    pic->add_option("--out", out_dir);

    CLI::App* ops = app.add_subcommand("check-ops", "multiplier-calculus property suite");
    ops->add_option("--n", ops_n);
    ops->add_option("--alpha", ops_alpha);
    ops->add_option("--trials", ops_trials);
    ops->add_option("--seed", ops_seed);
    ops->add_option("--dim", ops_dim);

    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    std::string prog = "nsk";
    argv.push_back(prog.data());
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (ops->parsed()) return detail::cmd_check_ops(ops_n, ops_alpha, ops_trials, ops_seed,
                                                        ops_dim);
        RunConfig cfg = detail::load_config(config_path);
        const std::filesystem::path dir = detail::prepare_out_dir(cfg, out_dir);
        if (sim->parsed()) return detail::cmd_simulate(cfg, dir);
        if (swa->parsed()) {
            for (double l : l_values)
                if (l != 0.0 && l != 1.0 && l != 2.0) {
                    std::cerr << "sweep-alpha: --l must be a subset of 0,1,2\n";
                    return 2;
                }
            if (alphas.size() < 2) {
                std::cerr << "sweep-alpha: need at least 2 alpha values\n";
                return 2;
            }
            return detail::cmd_sweep(cfg, dir, true, alphas, l_values);
        }
        if (swk->parsed()) {
            if (kappas.size() < 2) {
                std::cerr << "sweep-kappa: need at least 2 kappa values\n";
                return 2;
            }
            return detail::cmd_sweep(cfg, dir, false, kappas, l_values);
        }
        if (pic->parsed()) return detail::cmd_picard(cfg, dir, T, tol, max_iter);
    } catch (const std::invalid_argument& e) {
        std::cerr << "nsk: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nsk: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace nsk
