// Drives the installed lrob binary end to end: config resolution and
// digests, deterministic reruns, the exit-code contract, and the bundled
// snapshot fixture. Each case works in its own scratch directory under the
// system temp path.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#ifndef LROB_BINARY
#error "LROB_BINARY must be defined as the path to the lrob executable"
#endif
#ifndef LROB_FIXTURE
#error "LROB_FIXTURE must be defined as the path to the bundled snapshots"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lrob_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: ", p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

struct CliRun {
    int rc = -1;
    std::string out;
    std::string err;
};

CliRun run_cli(const fs::path& dir, const std::string& args) {
    static int call = 0;
    const fs::path so = dir / ("cli_stdout_" + std::to_string(call));
    const fs::path se = dir / ("cli_stderr_" + std::to_string(call));
    ++call;
    const std::string cmd = std::string(LROB_BINARY) + " " + args + " > " +
                            so.string() + " 2> " + se.string();
    const int raw = std::system(cmd.c_str());
    CliRun r;
    r.rc = raw == -1 ? -1 : WEXITSTATUS(raw);
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

bool within(double value, double target, double rel) {
    return std::abs(value - target) <= rel * std::abs(target);
}

} // namespace

TEST_CASE("stationary writes profile, diagnostics, and manifest") {
    const fs::path dir = scratch("stationary_smoke");
    const fs::path out = dir / "run";
    const auto r = run_cli(dir, "stationary --out " + out.string() + " --seed 1");
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    const std::string profile = slurp(out / "profile.csv");
    CHECK(first_line(profile) == "xi,rho_latent_bid,rho_latent_ask,phi_revealed");
    CHECK(count_lines(profile) > 1000);

    const json diag = load_json(out / "diagnostics.json");
    REQUIRE(diag.contains("residual"));
    CHECK(diag["residual"].get<double>() < 1e-6);
    CHECK(diag["n_points"].get<int>() > 100);

    const json man = load_json(out / "manifest.json");
    CHECK(man["command"] == "stationary");
    CHECK(man["version"] == "0.1.0");
    CHECK(man["seed"].get<unsigned long long>() == 1);
    CHECK(man["wall_clock_seconds"].get<double>() >= 0.0);
    const std::string digest = man["config_digest"].get<std::string>();
    CHECK(digest.size() == 16);
    CHECK(digest.find_first_not_of("0123456789abcdef") == std::string::npos);
    bool lists_profile = false;
    for (const auto& o : man["outputs"])
        if (o.get<std::string>().find("profile.csv") != std::string::npos)
            lists_profile = true;
    CHECK(lists_profile);
}

TEST_CASE("dry run prints the resolved config and writes nothing") {
    const fs::path dir = scratch("dry_run");
    const fs::path out = dir / "never";
    const auto r =
        run_cli(dir, "simulate --dry-run --seed 99 --out " + out.string());
    REQUIRE(r.rc == 0);
    CHECK_FALSE(fs::exists(out));
    const json resolved = json::parse(r.out);
    REQUIRE(resolved.contains("sim"));
    CHECK(resolved["sim"]["seed"].get<unsigned long long>() == 99);
    CHECK(resolved.contains("init"));
}

TEST_CASE("config digest ignores key order but tracks values") {
    const fs::path dir = scratch("digest");
    spill(dir / "a.json",
          R"({"mode": "analytic-dreq", "params": {"D_latent": 1.0, "D_revealed": 1.0, "omega": 1.0, "k": 1.0, "L_latent": 1.0}})");
    spill(dir / "b.json",
          R"({"params": {"k": 1.0, "L_latent": 1.0, "omega": 1.0, "D_revealed": 1.0, "D_latent": 1.0}, "mode": "analytic-dreq"})");
    spill(dir / "c.json",
          R"({"mode": "analytic-dreq", "params": {"D_latent": 1.0, "D_revealed": 1.0, "omega": 1.0, "k": 2.0, "L_latent": 1.0}})");

    std::vector<std::string> digests;
    for (const char* name : {"a", "b", "c"}) {
        const fs::path out = dir / ("run_" + std::string(name));
        const auto r = run_cli(dir, "stationary --config " +
                                        (dir / (std::string(name) + ".json")).string() +
                                        " --out " + out.string());
        CAPTURE(r.err);
        REQUIRE(r.rc == 0);
        digests.push_back(
            load_json(out / "manifest.json")["config_digest"].get<std::string>());
    }
    CHECK(digests[0] == digests[1]);
    CHECK(digests[0] != digests[2]);
}

TEST_CASE("identical config and seed reproduce outputs byte for byte") {
    const fs::path dir = scratch("rerun");
    spill(dir / "sim.json",
          R"({"sim": {"n_bins": 200, "L_latent": 2.0, "omega_reveal": 0.002, "omega_unreveal": 0.002, "n_steps": 300, "burn_in": 100}})");
    const std::string base =
        "simulate --config " + (dir / "sim.json").string() + " --out ";
    const auto r1 = run_cli(dir, base + (dir / "s1").string() + " --seed 42");
    const auto r2 = run_cli(dir, base + (dir / "s2").string() + " --seed 42");
    const auto r3 = run_cli(dir, base + (dir / "s3").string() + " --seed 43");
    REQUIRE(r1.rc == 0);
    REQUIRE(r2.rc == 0);
    REQUIRE(r3.rc == 0);
    for (const char* f : {"series.csv", "averaged_profile.csv", "summary.json"})
        CHECK_MESSAGE(slurp(dir / "s1" / f) == slurp(dir / "s2" / f), f);
    CHECK(slurp(dir / "s1" / "series.csv") != slurp(dir / "s3" / "series.csv"));
}

TEST_CASE("exit codes separate config, numeric, and liquidity failures") {
    const fs::path dir = scratch("exit_codes");

    SUBCASE("unknown config key") {
        spill(dir / "bad.json", R"({"mode": "bvp", "bogus": 1})");
        const auto r = run_cli(dir, "stationary --config " +
                                        (dir / "bad.json").string() + " --out " +
                                        (dir / "o").string());
        CHECK(r.rc == 2);
        CHECK(r.err.find("config error:") != std::string::npos);
    }
    SUBCASE("unknown mode") {
        spill(dir / "bad.json", R"({"mode": "cubist"})");
        const auto r = run_cli(dir, "stationary --config " +
                                        (dir / "bad.json").string() + " --out " +
                                        (dir / "o").string());
        CHECK(r.rc == 2);
        CHECK(r.err.find("config error:") != std::string::npos);
    }
    SUBCASE("malformed config JSON") {
        spill(dir / "bad.json", "{\"mode\": \n");
        const auto r = run_cli(dir, "stationary --config " +
                                        (dir / "bad.json").string() + " --out " +
                                        (dir / "o").string());
        CHECK(r.rc == 2);
    }
    SUBCASE("missing snapshot file") {
        const auto r = run_cli(dir, "calibrate /no/such/file.csv --out " +
                                        (dir / "o").string());
        CHECK(r.rc == 2);
        CHECK(r.err.find("config error:") != std::string::npos);
    }
    SUBCASE("missing subcommand") {
        const auto r = run_cli(dir, "");
        CHECK(r.rc == 2);
    }
    SUBCASE("numeric failure when no start converges") {
        spill(dir / "noconv.json", std::string(R"({"files": [")") +
                                       LROB_FIXTURE +
                                       R"("], "fit": {"max_iterations": 1}})");
        const auto r = run_cli(dir, "calibrate --config " +
                                        (dir / "noconv.json").string() +
                                        " --out " + (dir / "o").string());
        CHECK(r.rc == 3);
        CHECK(r.err.find("no start converged") != std::string::npos);
    }
    SUBCASE("liquidity crisis aborts the metaorder") {
        spill(dir / "crisis.json",
              R"({"sim": {"n_bins": 200, "L_latent": 0.5, "k": 0.05, "omega_reveal": 0.002, "omega_unreveal": 0.002, "burn_in": 20},
                  "order": {"m0": 50.0, "duration": 50},
                  "ensemble": 2, "record_stride": 1})");
        const fs::path out = dir / "crisis_out";
        const auto r = run_cli(dir, "impact --config " +
                                        (dir / "crisis.json").string() +
                                        " --out " + out.string() + " --seed 7");
        CHECK(r.rc == 4);
        const json meta = load_json(out / "metadata.json");
        CHECK(meta["crisis"].get<bool>());
        const json man = load_json(out / "manifest.json");
        CHECK(man["crisis"].get<bool>());
    }
    SUBCASE("help exits cleanly") {
        const auto r = run_cli(dir, "--help");
        CHECK(r.rc == 0);
        for (const char* sub :
             {"stationary", "simulate", "map", "impact", "calibrate"})
            CHECK(r.out.find(sub) != std::string::npos);
    }
}

TEST_CASE("analytic and solver profiles agree through the comparison report") {
    const fs::path dir = scratch("compare");
    spill(dir / "cfg.json",
          R"({"mode": "analytic-dreq", "compare_bvp": true, "params": {"D_latent": 1.0, "D_revealed": 1.0, "omega": 1.0, "k": 1.0, "L_latent": 1.0}})");
    const fs::path out = dir / "run";
    const auto r = run_cli(dir, "stationary --config " +
                                    (dir / "cfg.json").string() + " --out " +
                                    out.string());
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);
    const json cmp = load_json(out / "compare.json");
    CHECK(cmp["field"] == "phi_revealed");
    CHECK(cmp["max_rel_error"].get<double>() < 1e-4);

    // the zero-D_revealed closed form carries a genuine jump at the origin
    spill(dir / "dr0.json", R"({"mode": "analytic-dr0"})");
    const fs::path out0 = dir / "run0";
    const auto r0 = run_cli(dir, "stationary --config " +
                                     (dir / "dr0.json").string() + " --out " +
                                     out0.string());
    REQUIRE(r0.rc == 0);
    const json diag0 = load_json(out0 / "diagnostics.json");
    CHECK(diag0["phi_origin_discontinuous"].get<bool>());
    CHECK(diag0["phi_origin_jump"].get<double>() > 0.0);
}

TEST_CASE("bundled snapshots round-trip through calibrate") {
    const fs::path dir = scratch("calibrate");
    const fs::path out = dir / "run";
    const auto r = run_cli(dir, std::string("calibrate ") + LROB_FIXTURE +
                                    " --out " + out.string() + " --workers 2");
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    const json fit = load_json(out / "fit.json");
    CHECK(within(fit["L_latent"].get<double>(), 2500.0, 0.05));
    CHECK(within(fit["k"].get<double>(), 1.2, 0.05));
    CHECK(within(fit["l_latent"].get<double>(), 1.0, 0.05));
    CHECK(within(fit["l_revealed"].get<double>(), 0.35, 0.05));
    CHECK(fit["snapshots"].get<int>() == 12);
    CHECK(fit["skipped"].get<int>() == 0);
    CHECK(fit["starts_converged"].get<int>() >= 1);
    REQUIRE(fit.contains("stability"));
    CHECK(fit["stability"]["stable"].get<bool>());
    CHECK(fit["stability"]["margin"].get<double>() > 0.5);

    const std::string prof = slurp(out / "empirical_profile.csv");
    CHECK(first_line(prof) == "offset,density,density_var");
    CHECK(count_lines(prof) == 401);
    CHECK(first_line(slurp(out / "summary.csv")) ==
          "price,spread_ticks,daily_volume,L_latent,k,l_latent,l_revealed");
}

TEST_CASE("map sweep emits one row per cell plus the critical line") {
    const fs::path dir = scratch("map");
    spill(dir / "cfg.json",
          R"({"sweep": {"n_ll": 4, "n_lr": 3, "coord_min": 0.1, "coord_max": 1.0, "n_points": 401},
              "critical": {"n_ratios": 3, "tol_zeta": 0.01}})");
    const fs::path out = dir / "run";
    const auto r = run_cli(dir, "map --config " + (dir / "cfg.json").string() +
                                    " --out " + out.string());
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    const std::string sweep = slurp(out / "map.csv");
    CHECK(first_line(sweep) ==
          "k_ll,k_lr,slope0,overlap0,vol_revealed,stable,solver_ok");
    CHECK(count_lines(sweep) == 1 + 4 * 3);

    const std::string crit = slurp(out / "critical_line.csv");
    CHECK(first_line(crit) == "ratio,zeta_c,k_lr");
    REQUIRE(count_lines(crit) == 1 + 3);
    // the reveal threshold shrinks as revealed diffusion grows
    std::istringstream in(crit);
    std::string line;
    std::getline(in, line);
    std::vector<double> zc;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        zc.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    }
    CHECK(zc.front() > zc.back());
    for (double z : zc) {
        CHECK(z > 1.5);
        CHECK(z < 2.01);
    }
}

TEST_CASE("metaorder run writes trajectory, metadata, and exponent report") {
    const fs::path dir = scratch("impact");
    spill(dir / "cfg.json",
          R"({"sim": {"n_bins": 200, "L_latent": 5.0, "k": 0.05, "omega_reveal": 0.002, "omega_unreveal": 0.002, "burn_in": 50},
              "order": {"m0": 2.0, "duration": 25},
              "ensemble": 4, "record_stride": 5,
              "fit_window": {"q_min": 2.0, "q_max": 20.0}})");
    const fs::path out = dir / "run";
    const auto r = run_cli(dir, "impact --config " + (dir / "cfg.json").string() +
                                    " --out " + out.string() + " --seed 7");
    CAPTURE(r.err);
    REQUIRE(r.rc == 0);

    const std::string traj = slurp(out / "trajectory.csv");
    CHECK(first_line(traj) ==
          "t,q,price_mean,price_stderr,fair_price_mean,imbalance_mean,"
          "fair_distance_mean");
    CHECK(count_lines(traj) == 7); // t = 0, 5, 10, 15, 20, 25

    const json meta = load_json(out / "metadata.json");
    CHECK(meta["ensemble"].get<int>() == 4);
    CHECK(meta["completed"].get<int>() == 4);
    CHECK_FALSE(meta["crisis"].get<bool>());

    const json expo = load_json(out / "exponent.json");
    CHECK(expo["q_min"].get<double>() == 2.0);
    CHECK(expo["q_max"].get<double>() == 20.0);
    const double e = expo["exponent"].get<double>();
    CHECK(e > 0.0);
    CHECK(e < 1.0);
}
