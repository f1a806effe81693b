// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "nsk/cli.hpp"
#include "nsk/io.hpp"
#include "nsk/ops_check.hpp"
#include "nsk/random_field.hpp"

using namespace nsk;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("nsk_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("parse_config") {
    SECTION("minimal config applies documented defaults") {
        RunConfig cfg = parse_config("system = relaxed_insk\nn = 64\n");
        REQUIRE(cfg.n == 64);
        REQUIRE(cfg.length == Catch::Approx(2 * std::numbers::pi));
        REQUIRE(cfg.rho_bar == 1.0);
        REQUIRE(cfg.kappa == 1.0);
        REQUIRE(cfg.alpha == 16.0);
        REQUIRE(cfg.t_end == 0.25);
        REQUIRE(cfg.frames == 32);
        REQUIRE(cfg.init == "taylor_green");
    }

    SECTION("comments and spacing tolerated") {
        RunConfig cfg = parse_config("# a run\nsystem=navier_stokes\n  n =  32 # coarse\n");
        REQUIRE(cfg.system == SystemKind::NavierStokes);
        REQUIRE(cfg.n == 32);
    }

    SECTION("constraint violations name the key and the constraint") {
        REQUIRE_THROWS_WITH(parse_config("system = relaxed_insk\nn = 64\nkappa = -1\n"),
                            Catch::Matchers::ContainsSubstring("kappa") &&
                                Catch::Matchers::ContainsSubstring("constraint"));
        REQUIRE_THROWS_WITH(parse_config("system = relaxed_insk\nn = 7\n"),
                            Catch::Matchers::ContainsSubstring("n even"));
    }

    SECTION("unknown keys rejected") {
        REQUIRE_THROWS_WITH(parse_config("system = relaxed_insk\nn = 64\nalpha2 = 3\n"),
                            Catch::Matchers::ContainsSubstring("unknown key 'alpha2'"));
    }

    SECTION("missing required keys rejected") {
        REQUIRE_THROWS_WITH(parse_config("n = 64\n"),
                            Catch::Matchers::ContainsSubstring("system"));
        REQUIRE_THROWS_WITH(parse_config("system = local_insk\n"),
                            Catch::Matchers::ContainsSubstring("'n'"));
    }

    SECTION("type mismatches rejected") {
        REQUIRE_THROWS_WITH(parse_config("system = relaxed_insk\nn = sixty\n"),
                            Catch::Matchers::ContainsSubstring("integer"));
    }
}

TEST_CASE("NSKF round trip and error paths") {
    Grid g = make_grid(2, 16, 2 * std::numbers::pi);
    RealField f = random_band_limited(g, 5, 77);
    fs::path dir = temp_dir("nskf");
    fs::path path = dir / "f.nskf";

    SECTION("round trip is bitwise exact") {
        write_field(f, path);
        RealField back = read_field(path);
        REQUIRE(back.grid == g);
        REQUIRE(back.values.size() == f.values.size());
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            std::uint64_t a, b;
            std::memcpy(&a, &f.values[i], 8);
            std::memcpy(&b, &back.values[i], 8);
            REQUIRE(a == b);
        }
    }

    SECTION("truncated file reports truncation, returns nothing") {
        write_field(f, path);
        const auto full = fs::file_size(path);
        fs::resize_file(path, full - 64);
        REQUIRE_THROWS_WITH(read_field(path), Catch::Matchers::ContainsSubstring("truncated"));
    }

    SECTION("wrong magic names the found bytes") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "JUNKxxxxxxxxxxxxxxxx";
        out.close();
        REQUIRE_THROWS_WITH(read_field(path), Catch::Matchers::ContainsSubstring("magic"));
    }

    SECTION("3d fields round trip") {
        Grid g3 = make_grid(3, 8, 1.0);
        RealField f3 = random_band_limited(g3, 2, 5);
        write_field(f3, path);
        RealField back = read_field(path);
        REQUIRE(back.grid == g3);
        REQUIRE(back.values == f3.values);
    }
}

TEST_CASE("check-ops subcommand") {
    SECTION("library-level suite passes") {
        OpsCheckReport rep = check_operator_suite(32, 8.0, 10, 99);
        REQUIRE(rep.all_pass());
    }

    SECTION("cli wrapper exits 0") {
        REQUIRE(run_command({"check-ops", "--n", "32", "--alpha", "8", "--trials", "5"}) == 0);
    }
}

TEST_CASE("cli usage errors exit 2") {
    fs::path dir = temp_dir("usage");
    fs::path cfg = dir / "run.cfg";
    std::ofstream(cfg) << "system = relaxed_insk\nn = 16\nt_end = 0.01\nframes = 2\n";

    REQUIRE(run_command({"sweep-alpha", "--config", cfg.string(), "--alphas", "8",
                         "--out", (dir / "a").string()}) == 2);
    REQUIRE(run_command({"simulate", "--config", (dir / "missing.cfg").string()}) == 2);
    REQUIRE(run_command({"bogus-subcommand"}) == 2);

    std::ofstream(dir / "bad.cfg") << "system = relaxed_insk\nn = 16\nkappa = -2\n";
    REQUIRE(run_command({"simulate", "--config", (dir / "bad.cfg").string(),
                         "--out", (dir / "b").string()}) == 2);
}

TEST_CASE("simulate subcommand writes fields, reports, and one manifest") {
    fs::path dir = temp_dir("sim");
    fs::path cfg_path = dir / "run.cfg";
    std::ofstream(cfg_path) << "system = relaxed_insk\nn = 16\nalpha = 8\nt_end = 0.01\n"
                            << "frames = 2\nsafety = 0.5\n";
    fs::path out = dir / "out";
    REQUIRE(run_command({"simulate", "--config", cfg_path.string(), "--out", out.string()}) == 0);

    REQUIRE(fs::exists(out / "rho_0000.nskf"));
    REQUIRE(fs::exists(out / "u0_0002.nskf"));
    REQUIRE(fs::exists(out / "pi_0001.nskf"));
    REQUIRE(fs::exists(out / "energy.csv"));
    REQUIRE(fs::exists(out / "norms.csv"));
    REQUIRE(fs::exists(out / "manifest.json"));

    auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    REQUIRE(manifest["exit_status"] == 0);
    REQUIRE(manifest["monitors"]["blown_up"] == false);
    REQUIRE(manifest["config"]["n"] == 16);

    SECTION("t_end = 0 emits only the initial frame") {
        std::ofstream(cfg_path, std::ios::trunc)
            << "system = relaxed_insk\nn = 16\nt_end = 0\nframes = 4\n";
        fs::path out0 = dir / "out0";
        REQUIRE(run_command({"simulate", "--config", cfg_path.string(), "--out",
                             out0.string()}) == 0);
        REQUIRE(fs::exists(out0 / "rho_0000.nskf"));
        REQUIRE_FALSE(fs::exists(out0 / "rho_0001.nskf"));
    }
}

TEST_CASE("identical config and seed give byte-identical CSVs") {
    fs::path dir = temp_dir("determinism");
    fs::path cfg_path = dir / "run.cfg";
    std::ofstream(cfg_path) << "system = relaxed_insk\nn = 16\nalpha = 8\nt_end = 0.02\n"
                            << "frames = 2\ninit = rate_study\nseed = 11\n";
    fs::path o1 = dir / "r1", o2 = dir / "r2";
    REQUIRE(run_command({"simulate", "--config", cfg_path.string(), "--out", o1.string()}) == 0);
    REQUIRE(run_command({"simulate", "--config", cfg_path.string(), "--out", o2.string()}) == 0);
    REQUIRE(slurp(o1 / "energy.csv") == slurp(o2 / "energy.csv"));
    REQUIRE(slurp(o1 / "norms.csv") == slurp(o2 / "norms.csv"));
    REQUIRE(slurp(o1 / "rho_0002.nskf") == slurp(o2 / "rho_0002.nskf"));
}

TEST_CASE("sweep and picard subcommands produce their reports") {
    fs::path dir = temp_dir("sweep");
    fs::path cfg_path = dir / "run.cfg";
    std::ofstream(cfg_path) << "system = relaxed_insk\nn = 16\nkappa = 1\nalpha = 8\n"
                            << "t_end = 0.01\nframes = 2\n";

    SECTION("sweep-alpha") {
        fs::path out = dir / "alpha";
        REQUIRE(run_command({"sweep-alpha", "--config", cfg_path.string(), "--alphas",
                             "4,8,16", "--l", "0", "--out", out.string()}) == 0);
        const std::string csv = slurp(out / "table.csv");
        REQUIRE(csv.rfind("parameter,rho_err_l0,u_err_l0\n", 0) == 0);
        REQUIRE(fs::exists(out / "rate_fit.json"));
        REQUIRE(fs::exists(out / "manifest.json"));
    }

    SECTION("sweep-kappa") {
        fs::path out = dir / "kappa";
        REQUIRE(run_command({"sweep-kappa", "--config", cfg_path.string(), "--kappas",
                             "0.1,0.05", "--out", out.string()}) == 0);
        const std::string csv = slurp(out / "table.csv");
        REQUIRE(csv.rfind("parameter,rho_err_h3,u_err_h3\n", 0) == 0);
        auto fits = nlohmann::json::parse(slurp(out / "rate_fit.json"));
        REQUIRE(fits.empty());  // 2 points: fit refused, run still succeeds
    }

    SECTION("picard") {
        fs::path out = dir / "picard";
        REQUIRE(run_command({"picard", "--config", cfg_path.string(), "--T", "0.02", "--tol",
                             "1e-8", "--max-iter", "20", "--out", out.string()}) == 0);
        const std::string csv = slurp(out / "contraction.csv");
        REQUIRE(csv.rfind("iteration,x_sup,ratio\n", 0) == 0);
        auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
        REQUIRE(manifest["monitors"]["converged"] == true);
        REQUIRE(manifest["monitors"]["eta_consistency_l2"].get<double>() < 1e-8);
    }
}
