// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsk/dynamics.hpp"
#include "nsk/experiments.hpp"
#include "nsk/presets.hpp"

namespace nsk {

inline constexpr const char* kArtifactVersion = "1.0.0";

// ---------------------------------------------------------------------------
// run configuration

struct RunConfig {
    SystemKind system = SystemKind::RelaxedINSK;
    int dim = 2;
    int n = 0;  // required
    double length = 2.0 * std::numbers::pi;
    double kappa = 1.0;
    double alpha = 16.0;
    double rho_bar = 1.0;
    double kappa_max = 10.0;
    std::string init = "taylor_green";  // taylor_green | equilibrium | rate_study | files
    double amplitude = 0.2;             // taylor_green density contrast
    std::string init_rho, init_u0, init_u1, init_u2;
    double t_end = 0.25;
    std::string dt_policy = "cfl";  // cfl | fixed
    double dt = 0.0;
    double safety = 0.5;
    int frames = 32;
    std::uint64_t seed = 0;
    double blowup_ceiling = 1e6;
    double pressure_tol = 1e-12;
    std::string out_dir;  // empty: NSK_OUTPUT_DIR or "."

    PhysParams params() const {
        PhysParams p;
        p.kappa = kappa;
        p.alpha = alpha;
        p.rho_bar = rho_bar;
        p.kappa_max = kappa_max;
        p.system = system;
        return p;
    }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
    throw std::invalid_argument("config error: key '" + key + "': " + what);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        config_error(key, "expected a number, got '" + v + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        config_error(key, "expected an integer, got '" + v + "'");
    }
}

}  // namespace detail

inline SystemKind parse_system(const std::string& v) {
    if (v == "relaxed_insk") return SystemKind::RelaxedINSK;
    if (v == "local_insk") return SystemKind::LocalINSK;
    if (v == "navier_stokes") return SystemKind::NavierStokes;
    throw std::invalid_argument(
        "config error: key 'system': expected relaxed_insk | local_insk | navier_stokes, got '" +
        v + "'");
}

/// Parse a flat key = value config.  '#' starts a comment; unknown keys are
/// errors; every constraint violation names the key and the constraint.
inline RunConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        if (strip(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config error: line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string val = strip(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config error: line " + std::to_string(lineno) +
                                        ": empty key or value");
        if (kv.count(key))
            throw std::invalid_argument("config error: duplicate key '" + key + "'");
        kv[key] = val;
    }

    RunConfig cfg;
    bool have_system = false, have_n = false;
    for (const auto& [key, val] : kv) {
        if (key == "system") {
            cfg.system = parse_system(val);
            have_system = true;
        } else if (key == "dim") {
            cfg.dim = static_cast<int>(detail::parse_int(key, val));
            if (cfg.dim != 2 && cfg.dim != 3) detail::config_error(key, "constraint dim in {2,3}");
        } else if (key == "n") {
            cfg.n = static_cast<int>(detail::parse_int(key, val));
            have_n = true;
            if (cfg.n < 8 || cfg.n % 2 != 0)
                detail::config_error(key, "constraint n even and >= 8");
        } else if (key == "length") {
            cfg.length = detail::parse_double(key, val);
            if (!(cfg.length > 0.0)) detail::config_error(key, "constraint length > 0");
        } else if (key == "kappa") {
            cfg.kappa = detail::parse_double(key, val);
            if (!(cfg.kappa >= 0.0)) detail::config_error(key, "constraint kappa >= 0");
        } else if (key == "alpha") {
            cfg.alpha = detail::parse_double(key, val);
            if (!(cfg.alpha > 0.0)) detail::config_error(key, "constraint alpha > 0");
        } else if (key == "rho_bar") {
            cfg.rho_bar = detail::parse_double(key, val);
            if (!(cfg.rho_bar > 0.0)) detail::config_error(key, "constraint rho_bar > 0");
        } else if (key == "kappa_max") {
            cfg.kappa_max = detail::parse_double(key, val);
            if (!(cfg.kappa_max > 0.0)) detail::config_error(key, "constraint kappa_max > 0");
        } else if (key == "init") {
            if (val != "taylor_green" && val != "equilibrium" && val != "rate_study" &&
                val != "files")
                detail::config_error(key,
                                     "expected taylor_green | equilibrium | rate_study | files");
            cfg.init = val;
        } else if (key == "amplitude") {
            cfg.amplitude = detail::parse_double(key, val);
        } else if (key == "init_rho") {
            cfg.init_rho = val;
        } else if (key == "init_u0") {
            cfg.init_u0 = val;
        } else if (key == "init_u1") {
            cfg.init_u1 = val;
        } else if (key == "init_u2") {
            cfg.init_u2 = val;
        } else if (key == "t_end") {
            cfg.t_end = detail::parse_double(key, val);
            if (cfg.t_end < 0.0) detail::config_error(key, "constraint t_end >= 0");
        } else if (key == "dt_policy") {
            if (val != "cfl" && val != "fixed") detail::config_error(key, "expected cfl | fixed");
            cfg.dt_policy = val;
        } else if (key == "dt") {
            cfg.dt = detail::parse_double(key, val);
            if (!(cfg.dt > 0.0)) detail::config_error(key, "constraint dt > 0");
        } else if (key == "safety") {
            cfg.safety = detail::parse_double(key, val);
            if (!(cfg.safety > 0.0 && cfg.safety <= 1.0))
                detail::config_error(key, "constraint safety in (0, 1]");
        } else if (key == "frames") {
            cfg.frames = static_cast<int>(detail::parse_int(key, val));
            if (cfg.frames < 1) detail::config_error(key, "constraint frames >= 1");
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(detail::parse_int(key, val));
        } else if (key == "blowup_ceiling") {
            cfg.blowup_ceiling = detail::parse_double(key, val);
            if (!(cfg.blowup_ceiling > 0.0))
                detail::config_error(key, "constraint blowup_ceiling > 0");
        } else if (key == "pressure_tol") {
            cfg.pressure_tol = detail::parse_double(key, val);
            if (!(cfg.pressure_tol > 0.0 && cfg.pressure_tol <= 1e-10))
                detail::config_error(key, "constraint pressure_tol in (0, 1e-10]");
        } else if (key == "out_dir") {
            cfg.out_dir = val;
        } else {
            throw std::invalid_argument("config error: unknown key '" + key + "'");
        }
    }
    if (!have_system) throw std::invalid_argument("config error: missing required key 'system'");
    if (!have_n) throw std::invalid_argument("config error: missing required key 'n'");
    if (cfg.kappa > cfg.kappa_max)
        detail::config_error("kappa", "constraint kappa <= kappa_max");
    if (cfg.dt_policy == "fixed" && cfg.dt <= 0.0)
        detail::config_error("dt", "dt_policy = fixed requires dt > 0");
    if (cfg.init == "files" && (cfg.init_rho.empty() || cfg.init_u0.empty() ||
                                cfg.init_u1.empty() || (cfg.dim == 3 && cfg.init_u2.empty())))
        detail::config_error("init", "init = files requires init_rho and all init_u components");
    return cfg;
}

inline std::string default_output_root() {
    const char* env = std::getenv("NSK_OUTPUT_DIR");
    return env && *env ? std::string(env) : std::string(".");
}

// ---------------------------------------------------------------------------
// NSKF binary field format
//
// magic "NSKF" | u32 version = 1 | u8 dim | u64 size per axis | f64 length |
// row-major f64 samples; all little-endian.

static_assert(std::endian::native == std::endian::little,
              "NSKF serialization assumes a little-endian host");

inline void write_field(const RealField& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_field: cannot open " + path.string());
    const Grid& g = f.grid;
    out.write("NSKF", 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint8_t dim = static_cast<std::uint8_t>(g.dim());
    out.write(reinterpret_cast<const char*>(&dim), 1);
    for (int a = 0; a < g.dim(); ++a) {
        const std::uint64_t n = static_cast<std::uint64_t>(g.n());
        out.write(reinterpret_cast<const char*>(&n), 8);
    }
    const double length = g.length();
    out.write(reinterpret_cast<const char*>(&length), 8);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_field: short write to " + path.string());
}

inline RealField read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_field: cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "NSKF", 4) != 0) {
        std::string found;
        for (int i = 0; i < in.gcount(); ++i) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned char>(magic[i]));
            found += buf;
        }
        throw std::runtime_error("read_field: bad magic in " + path.string() + " (found bytes 0x" +
                                 (found.empty() ? "<none>" : found) + ", expected \"NSKF\")");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != 1)
        throw std::runtime_error("read_field: unsupported version " + std::to_string(version) +
                                 " in " + path.string());
    std::uint8_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 1);
    if (!in || (dim != 2 && dim != 3))
        throw std::runtime_error("read_field: invalid dim in " + path.string());
    std::uint64_t sizes[3] = {};
    for (int a = 0; a < dim; ++a) in.read(reinterpret_cast<char*>(&sizes[a]), 8);
    double length = 0.0;
    in.read(reinterpret_cast<char*>(&length), 8);
    if (!in) throw std::runtime_error("read_field: truncated header in " + path.string());
    for (int a = 1; a < dim; ++a)
        if (sizes[a] != sizes[0])
            throw std::runtime_error("read_field: anisotropic sizes unsupported in " +
                                     path.string());
    Grid g = make_grid(dim, static_cast<int>(sizes[0]), length);
    RealField f(g);
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != f.values.size() * sizeof(double))
        throw std::runtime_error("read_field: truncated samples in " + path.string() + " (got " +
                                 std::to_string(in.gcount()) + " bytes of " +
                                 std::to_string(f.values.size() * sizeof(double)) + ")");
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("read_field: trailing bytes after samples in " + path.string());
    return f;
}

// ---------------------------------------------------------------------------
// reports

inline std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << format_g17(row[i]) << (i + 1 < row.size() ? "," : "\n");
    }
    if (!out) throw std::runtime_error("write_csv: short write to " + path.string());
}

inline nlohmann::json config_json(const RunConfig& cfg) {
    return nlohmann::json{{"system", to_string(cfg.system)},
                          {"dim", cfg.dim},
                          {"n", cfg.n},
                          {"length", cfg.length},
                          {"kappa", cfg.kappa},
                          {"alpha", cfg.alpha},
                          {"rho_bar", cfg.rho_bar},
                          {"kappa_max", cfg.kappa_max},
                          {"init", cfg.init},
                          {"amplitude", cfg.amplitude},
                          {"t_end", cfg.t_end},
                          {"dt_policy", cfg.dt_policy},
                          {"dt", cfg.dt},
                          {"safety", cfg.safety},
                          {"frames", cfg.frames},
                          {"seed", cfg.seed},
                          {"blowup_ceiling", cfg.blowup_ceiling},
                          {"pressure_tol", cfg.pressure_tol}};
}

/// Manifest: written exactly once per run directory, after every data file.
inline void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                           const nlohmann::json& monitors, int exit_status,
                           double wall_seconds) {
    nlohmann::json m{{"artifact_version", kArtifactVersion},
                     {"config", config_json(cfg)},
                     {"monitors", monitors},
                     {"exit_status", exit_status},
                     {"wall_clock_seconds", wall_seconds}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("write_manifest: cannot open manifest.json");
    out << m.dump(2) << "\n";
}

/// Build the initial state a config describes.
inline FlowState initial_state(const RunConfig& cfg) {
    Grid g = make_grid(cfg.dim, cfg.n, cfg.length);
    if (cfg.init == "taylor_green") return taylor_green_state(g, cfg.rho_bar, cfg.amplitude);
    if (cfg.init == "equilibrium") return equilibrium_state(g, cfg.rho_bar);
    if (cfg.init == "rate_study") return rate_study_state(g, cfg.rho_bar, cfg.seed);
    FlowState s;
    s.rho = read_field(cfg.init_rho);
    if (s.rho.grid != g) throw std::runtime_error("initial_state: init_rho grid mismatch");
    s.u.push_back(read_field(cfg.init_u0));
    s.u.push_back(read_field(cfg.init_u1));
    if (cfg.dim == 3) s.u.push_back(read_field(cfg.init_u2));
    for (const auto& c : s.u)
        if (c.grid != g) throw std::runtime_error("initial_state: init_u grid mismatch");
    s.pi = RealField(g);
    return s;
}

}  // namespace nsk
