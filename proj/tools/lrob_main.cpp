// Command-line front end: stationary solves, particle simulations, stability
// maps, metaorder impact ensembles, and book calibration. Every subcommand
// resolves its config (defaults <- --config JSON <- flag overrides), writes
// CSV/JSON artifacts into --out, and finishes with a manifest.json listing
// them. CSV bodies are byte-identical across reruns with the same config and
// seed; only the manifest's wall clock varies.
//
// Exit codes: 0 success, 2 config/input error, 3 numeric failure or domain
// overflow, 4 liquidity-crisis abort (partial outputs are still written and
// flagged in the manifest).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrob/calibration.hpp"
#include "lrob/impact.hpp"
#include "lrob/model.hpp"
#include "lrob/particle_sim.hpp"
#include "lrob/profile.hpp"
#include "lrob/stability_map.hpp"
#include "lrob/stationary_analytic.hpp"
#include "lrob/stationary_bvp.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericFailure = 3;
constexpr int kLiquidityCrisis = 4;

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

struct GlobalFlags {
    std::string config_path;
    std::string out_dir = "lrob_out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0; // 0: keep the config's value
    bool dry_run = false;
    std::vector<std::string> files; // calibrate positionals
};

// Collects output files and writes the closing manifest.
struct RunContext {
    std::string command;
    std::string out_dir;
    std::string digest;
    std::uint64_t seed = 0;
    json marks = json::object();
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point t0 =
        std::chrono::steady_clock::now();

    std::string path(const std::string& name) {
        outputs.push_back(name);
        return out_dir + "/" + name;
    }

    void write_manifest() const {
        json m;
        m["command"] = command;
        m["config_digest"] = digest;
        m["outputs"] = outputs;
        m["seed"] = seed;
        m["version"] = kVersion;
        m["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        for (auto it = marks.begin(); it != marks.end(); ++it)
            m[it.key()] = it.value();
        std::ofstream out(out_dir + "/manifest.json");
        if (!out)
            throw std::runtime_error("cannot write " + out_dir +
                                     "/manifest.json");
        out << m.dump(2) << '\n';
    }
};

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object())
        throw std::invalid_argument(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok)
            throw std::invalid_argument("unknown key in " + where + ": " +
                                        it.key());
    }
}

double num(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        throw std::invalid_argument(where + "." + key + " must be a number");
    return it->get<double>();
}

int integer(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer())
        throw std::invalid_argument(where + "." + key +
                                    " must be an integer");
    return it->get<int>();
}

std::string text(const json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw std::invalid_argument(where + "." + key + " must be a string");
    return it->get<std::string>();
}

json sim_defaults() {
    lrob::SimConfig c; // mirror the library defaults
    return {{"n_bins", c.n_bins},
            {"price_step", c.price_step},
            {"tau", c.tau},
            {"p_diff_latent", c.p_diff_latent},
            {"p_diff_revealed", c.p_diff_revealed},
            {"omega_reveal", c.omega_reveal},
            {"omega_unreveal", c.omega_unreveal},
            {"k", c.k},
            {"L_latent", c.L_latent},
            {"seed", 0},
            {"wrong_side", "in_place"},
            {"n_steps", 2000},
            {"burn_in", 1000},
            {"volatility_window", c.volatility_window},
            {"profile_stride", c.profile_stride},
            {"batch_size", c.batch_size}};
}

lrob::SimConfig sim_from_json(const json& j, const std::string& where) {
    check_keys(j,
               {"n_bins", "price_step", "tau", "p_diff_latent",
                "p_diff_revealed", "omega_reveal", "omega_unreveal", "k",
                "L_latent", "seed", "wrong_side", "n_steps", "burn_in",
                "volatility_window", "profile_stride", "batch_size"},
               where);
    lrob::SimConfig c;
    c.n_bins = integer(j, "n_bins", where);
    c.price_step = num(j, "price_step", where);
    c.tau = num(j, "tau", where);
    c.p_diff_latent = num(j, "p_diff_latent", where);
    c.p_diff_revealed = num(j, "p_diff_revealed", where);
    c.omega_reveal = num(j, "omega_reveal", where);
    c.omega_unreveal = num(j, "omega_unreveal", where);
    c.k = num(j, "k", where);
    c.L_latent = num(j, "L_latent", where);
    c.seed = j.at("seed").get<std::uint64_t>();
    const std::string ws = text(j, "wrong_side", where);
    if (ws == "in_place") {
        c.wrong_side = lrob::WrongSideMode::in_place;
    } else if (ws == "to_best_quote") {
        c.wrong_side = lrob::WrongSideMode::to_best_quote;
    } else {
        throw std::invalid_argument(
            where + ".wrong_side must be in_place or to_best_quote");
    }
    c.n_steps = j.at("n_steps").get<long long>();
    c.burn_in = j.at("burn_in").get<long long>();
    c.volatility_window = integer(j, "volatility_window", where);
    c.profile_stride = integer(j, "profile_stride", where);
    c.batch_size = integer(j, "batch_size", where);
    return c;
}

lrob::BvpConfig bvp_from_json(const json& j, const std::string& where) {
    check_keys(j,
               {"n_points", "xi_max", "clustering", "tolerance",
                "max_refinements"},
               where);
    lrob::BvpConfig b;
    b.n_points = integer(j, "n_points", where);
    b.xi_max = num(j, "xi_max", where);
    b.clustering = num(j, "clustering", where);
    b.tolerance = num(j, "tolerance", where);
    b.max_refinements = integer(j, "max_refinements", where);
    return b;
}

json bvp_defaults() {
    lrob::BvpConfig b;
    return {{"n_points", b.n_points},
            {"xi_max", b.xi_max},
            {"clustering", b.clustering},
            {"tolerance", b.tolerance},
            {"max_refinements", b.max_refinements}};
}

json default_config(const std::string& cmd) {
    if (cmd == "stationary") {
        return {{"mode", "bvp"},
                {"params",
                 {{"D_latent", 1.0},
                  {"D_revealed", 0.0},
                  {"omega", 1.0},
                  {"k", 1.0},
                  {"L_latent", 1.0}}},
                {"solver", bvp_defaults()},
                {"compare_bvp", false}};
    }
    if (cmd == "simulate")
        return {{"sim", sim_defaults()}, {"init", "stationary"}};
    if (cmd == "map") {
        return {{"sweep",
                 {{"n_ll", 60},
                  {"n_lr", 60},
                  {"coord_min", 0.02},
                  {"coord_max", 3.0},
                  {"workers", 1},
                  {"n_points", 1201}}},
                {"critical", {{"n_ratios", 25}, {"tol_zeta", 1e-3}}}};
    }
    if (cmd == "impact") {
        json sim = sim_defaults();
        sim["n_steps"] = 0; // set by order.duration
        return {{"sim", sim},
                {"order", {{"m0", 0.5}, {"duration", 100.0}}},
                {"ensemble", 16},
                {"record_stride", 10},
                {"workers", 1},
                {"fit_window", nullptr}};
    }
    if (cmd == "calibrate") {
        lrob::IngestConfig ic;
        lrob::FitConfig fc;
        return {{"files", json::array()},
                {"ingest",
                 {{"bin_width", ic.bin_width},
                  {"n_bins", ic.n_bins},
                  {"tick_size", ic.tick_size},
                  {"daily_volume", ic.daily_volume}}},
                {"fit",
                 {{"n_starts", fc.n_starts},
                  {"max_iterations", fc.max_iterations},
                  {"fd_step", fc.fd_step},
                  {"tolerance", fc.tolerance},
                  {"weights", "uniform"},
                  {"workers", fc.workers}}},
                {"solver", bvp_defaults()},
                {"stability", {{"enabled", true}, {"tol_zeta", 1e-3}}}};
    }
    throw std::logic_error("unknown command " + cmd);
}

// The stationary book the particle runs start from: closed forms where they
// exist, the finite-difference solve otherwise.
lrob::BookProfile stationary_profile_for(const lrob::ModelParams& p) {
    if (p.D_revealed == 0.0 && p.equal_rates())
        return lrob::stationary_zero_dr(p, lrob::default_grid(p));
    if (p.equal_rates() &&
        std::abs(p.D_revealed - p.D_latent) <= 1e-12 * p.D_latent)
        return lrob::stationary_equal_d(p, lrob::default_grid(p));
    return lrob::solve_stationary(p).profile;
}

int cmd_stationary(const json& cfg, RunContext& ctx) {
    check_keys(cfg, {"mode", "params", "solver", "compare_bvp"}, "config");
    const std::string mode = text(cfg, "mode", "config");
    const lrob::ModelParams params =
        lrob::params_from_json_text(cfg.at("params").dump());
    const lrob::BvpConfig bcfg = bvp_from_json(cfg.at("solver"), "solver");
    const bool compare = cfg.at("compare_bvp").get<bool>();

    lrob::BookProfile profile;
    json diag;
    diag["mode"] = mode;
    if (mode == "analytic-dr0" || mode == "analytic-dreq") {
        params.validate();
        std::vector<double> grid =
            bcfg.xi_max > 0.0
                ? lrob::clustered_grid(bcfg.xi_max, bcfg.n_points,
                                       bcfg.clustering)
                : lrob::default_grid(params, bcfg.n_points, bcfg.clustering);
        if (mode == "analytic-dr0") {
            profile = lrob::stationary_zero_dr(params, grid);
            diag["phi_origin_discontinuous"] = true;
            diag["phi_origin_jump"] = lrob::jump_at_origin(params);
        } else {
            profile = lrob::stationary_equal_d(params, grid);
            diag["phi_origin_discontinuous"] = false;
            diag["phi_origin_jump"] = 0.0;
        }
    } else if (mode == "bvp") {
        const lrob::BvpSolution sol = lrob::solve_stationary(params, bcfg);
        profile = sol.profile;
        diag["residual"] = sol.diagnostics.residual;
        diag["refinements"] = sol.diagnostics.refinements;
        diag["n_points"] = sol.diagnostics.n_points;
        diag["unstable"] = sol.diagnostics.unstable;
    } else {
        throw std::invalid_argument(
            "mode must be analytic-dr0, analytic-dreq, or bvp");
    }

    lrob::write_profile_csv(profile, ctx.path("profile.csv"));
    write_text(ctx.path("diagnostics.json"), diag.dump(2) + "\n");

    if (compare && mode != "bvp") {
        const lrob::BvpSolution sol = lrob::solve_stationary(params, bcfg);
        double max_abs = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < sol.profile.grid.size(); ++i) {
            const double xi = sol.profile.grid[i];
            const double ref = mode == "analytic-dr0"
                                   ? lrob::phi_revealed_zero_dr(params, xi)
                                   : lrob::phi_revealed_equal_d(params, xi);
            max_abs = std::max(max_abs,
                               std::abs(sol.profile.phi_revealed[i] - ref));
            scale = std::max(scale, std::abs(ref));
        }
        json cmp;
        cmp["field"] = "phi_revealed";
        cmp["n_points"] = sol.profile.grid.size();
        cmp["max_rel_error"] = scale > 0.0 ? max_abs / scale : 0.0;
        write_text(ctx.path("compare.json"), cmp.dump(2) + "\n");
    }
    return kOk;
}

int cmd_simulate(const json& cfg, RunContext& ctx) {
    check_keys(cfg, {"sim", "init"}, "config");
    const lrob::SimConfig sc = sim_from_json(cfg.at("sim"), "sim");
    sc.validate();
    ctx.seed = sc.seed;
    const std::string init = text(cfg, "init", "config");

    lrob::SimState state;
    if (init == "stationary") {
        state = lrob::initial_state_from_profile(
            sc, stationary_profile_for(sc.model()));
    } else if (init == "ramp") {
        state = lrob::initial_state_ramp(sc);
    } else {
        throw std::invalid_argument("init must be stationary or ramp");
    }

    const lrob::RunResult rr = lrob::run_simulation(sc, std::move(state));

    {
        std::ofstream out(ctx.path("series.csv"));
        if (!out) throw std::runtime_error("cannot write series.csv");
        out << "t,trade_price,fair_price\n";
        for (std::size_t i = 0; i < rr.series.time.size(); ++i)
            out << lrob::format_double(rr.series.time[i]) << ','
                << lrob::format_double(rr.series.trade[i]) << ','
                << lrob::format_double(rr.series.fair[i]) << '\n';
    }
    {
        const lrob::AveragedProfile& ap = rr.profile;
        std::ofstream out(ctx.path("averaged_profile.csv"));
        if (!out) throw std::runtime_error("cannot write averaged_profile.csv");
        out << "xi,latent_bid,latent_bid_err,latent_ask,latent_ask_err,phi,"
               "phi_err\n";
        for (std::size_t i = 0; i < ap.xi.size(); ++i)
            out << lrob::format_double(ap.xi[i]) << ','
                << lrob::format_double(ap.latent_bid[i]) << ','
                << lrob::format_double(ap.latent_bid_err[i]) << ','
                << lrob::format_double(ap.latent_ask[i]) << ','
                << lrob::format_double(ap.latent_ask_err[i]) << ','
                << lrob::format_double(ap.phi[i]) << ','
                << lrob::format_double(ap.phi_err[i]) << '\n';
    }
    {
        const lrob::VolatilityEstimate vt =
            lrob::volatility_of(rr.series.trade, sc.volatility_window);
        const lrob::VolatilityEstimate vf =
            lrob::volatility_of(rr.series.fair, sc.volatility_window);
        json s;
        s["steps_run"] = rr.steps_run;
        s["crisis"] = rr.crisis;
        s["overflow"] = rr.overflow;
        s["profile_snapshots"] = rr.profile.snapshots;
        s["profile_batches"] = rr.profile.batches;
        s["injected"] = rr.final_state.injected;
        s["matched_pairs"] = rr.final_state.matched_pairs;
        s["revealed_count"] = rr.final_state.revealed_count;
        s["unrevealed_count"] = rr.final_state.unrevealed_count;
        s["total_particles"] = rr.final_state.total_particles();
        s["volatility"] = {
            {"trade",
             {{"rogers_satchell_sq", vt.rogers_satchell_sq},
              {"parkinson_sq", vt.parkinson_sq},
              {"windows", vt.windows}}},
            {"fair",
             {{"rogers_satchell_sq", vf.rogers_satchell_sq},
              {"parkinson_sq", vf.parkinson_sq},
              {"windows", vf.windows}}}};
        write_text(ctx.path("summary.json"), s.dump(2) + "\n");
    }

    ctx.marks["crisis"] = rr.crisis;
    ctx.marks["overflow"] = rr.overflow;
    if (rr.crisis) return kLiquidityCrisis;
    if (rr.overflow) return kNumericFailure;
    return kOk;
}

int cmd_map(const json& cfg, RunContext& ctx) {
    check_keys(cfg, {"sweep", "critical"}, "config");
    const json& sj = cfg.at("sweep");
    check_keys(sj,
               {"n_ll", "n_lr", "coord_min", "coord_max", "workers",
                "n_points"},
               "sweep");
    lrob::SweepConfig sw;
    sw.n_ll = integer(sj, "n_ll", "sweep");
    sw.n_lr = integer(sj, "n_lr", "sweep");
    sw.coord_min = num(sj, "coord_min", "sweep");
    sw.coord_max = num(sj, "coord_max", "sweep");
    sw.workers = integer(sj, "workers", "sweep");
    sw.bvp.n_points = integer(sj, "n_points", "sweep");
    sw.validate();

    const json& cj = cfg.at("critical");
    check_keys(cj, {"n_ratios", "tol_zeta"}, "critical");
    const int n_ratios = integer(cj, "n_ratios", "critical");
    const double tol = num(cj, "tol_zeta", "critical");

    const std::vector<lrob::StabilityCell> cells = lrob::sweep(sw);
    lrob::write_sweep_csv(cells, ctx.path("map.csv"));
    const lrob::CriticalLine line =
        lrob::critical_line(lrob::default_ratio_grid(n_ratios), tol, sw.bvp);
    lrob::write_critical_csv(line, ctx.path("critical_line.csv"));
    return kOk;
}

int cmd_impact(const json& cfg, RunContext& ctx) {
    check_keys(cfg,
               {"sim", "order", "ensemble", "record_stride", "workers",
                "fit_window"},
               "config");
    lrob::MetaorderConfig mc;
    mc.sim = sim_from_json(cfg.at("sim"), "sim");
    ctx.seed = mc.sim.seed;
    const json& oj = cfg.at("order");
    check_keys(oj, {"m0", "duration"}, "order");
    mc.order.m0 = num(oj, "m0", "order");
    mc.order.duration = num(oj, "duration", "order");
    mc.ensemble = integer(cfg, "ensemble", "config");
    mc.record_stride = integer(cfg, "record_stride", "config");
    mc.workers = integer(cfg, "workers", "config");

    const lrob::ImpactTrajectory traj = lrob::run_metaorder(mc);
    lrob::write_trajectory_csv(traj, ctx.path("trajectory.csv"));
    write_text(ctx.path("metadata.json"), lrob::impact_metadata_json(mc, traj));

    const json& fw = cfg.at("fit_window");
    if (!fw.is_null()) {
        check_keys(fw, {"q_min", "q_max"}, "fit_window");
        const double q_min = num(fw, "q_min", "fit_window");
        const double q_max = num(fw, "q_max", "fit_window");
        json ej;
        ej["q_min"] = q_min;
        ej["q_max"] = q_max;
        ej["exponent"] = lrob::fit_impact_exponent(traj, q_min, q_max);
        write_text(ctx.path("exponent.json"), ej.dump(2) + "\n");
    }

    ctx.marks["crisis"] = traj.crisis;
    ctx.marks["completed_members"] = traj.completed;
    return traj.crisis ? kLiquidityCrisis : kOk;
}

int cmd_calibrate(const json& cfg, RunContext& ctx) {
    check_keys(cfg, {"files", "ingest", "fit", "solver", "stability"},
               "config");
    const json& fj = cfg.at("files");
    if (!fj.is_array() || fj.empty())
        throw std::invalid_argument(
            "calibrate needs at least one snapshot CSV (files)");
    std::vector<std::string> files;
    for (const json& f : fj) {
        if (!f.is_string())
            throw std::invalid_argument("files entries must be strings");
        files.push_back(f.get<std::string>());
    }

    const json& ij = cfg.at("ingest");
    check_keys(ij, {"bin_width", "n_bins", "tick_size", "daily_volume"},
               "ingest");
    lrob::IngestConfig ic;
    ic.bin_width = num(ij, "bin_width", "ingest");
    ic.n_bins = integer(ij, "n_bins", "ingest");
    ic.tick_size = num(ij, "tick_size", "ingest");
    ic.daily_volume = num(ij, "daily_volume", "ingest");
    ic.validate();

    const json& tj = cfg.at("fit");
    check_keys(tj,
               {"n_starts", "max_iterations", "fd_step", "tolerance",
                "weights", "workers"},
               "fit");
    lrob::FitConfig fc;
    fc.n_starts = integer(tj, "n_starts", "fit");
    fc.max_iterations = integer(tj, "max_iterations", "fit");
    fc.fd_step = num(tj, "fd_step", "fit");
    fc.tolerance = num(tj, "tolerance", "fit");
    fc.workers = integer(tj, "workers", "fit");
    const std::string w = text(tj, "weights", "fit");
    if (w == "uniform") {
        fc.weights = lrob::FitWeights::uniform;
    } else if (w == "inverse_variance") {
        fc.weights = lrob::FitWeights::inverse_variance;
    } else {
        throw std::invalid_argument(
            "fit.weights must be uniform or inverse_variance");
    }
    fc.validate();
    const lrob::BvpConfig bcfg = bvp_from_json(cfg.at("solver"), "solver");

    lrob::EmpiricalBookProfile profile;
    try {
        profile = lrob::ingest_snapshots(files, ic);
    } catch (const std::runtime_error& e) {
        // unreadable or degenerate input data is a config-class failure
        throw std::invalid_argument(e.what());
    }

    {
        std::ofstream out(ctx.path("empirical_profile.csv"));
        if (!out)
            throw std::runtime_error("cannot write empirical_profile.csv");
        out << "offset,density,density_var\n";
        for (std::size_t i = 0; i < profile.offset.size(); ++i)
            out << lrob::format_double(profile.offset[i]) << ','
                << lrob::format_double(profile.density[i]) << ','
                << lrob::format_double(profile.density_var[i]) << '\n';
    }

    const lrob::FitResult fr = lrob::fit(profile, bcfg, fc);

    json out = json::parse(lrob::fit_json(fr));
    out["snapshots"] = profile.snapshots;
    out["skipped"] = profile.skipped;
    out["average_price"] = profile.average_price;
    out["average_spread_ticks"] = profile.average_spread_ticks;
    out["daily_volume"] = profile.daily_volume;

    const json& stj = cfg.at("stability");
    check_keys(stj, {"enabled", "tol_zeta"}, "stability");
    if (stj.at("enabled").get<bool>()) {
        const double ratio = fr.l_revealed / fr.l_latent;
        const lrob::CriticalLine line = lrob::critical_line(
            {ratio}, num(stj, "tol_zeta", "stability"),
            lrob::BvpConfig{.n_points = 1201});
        const lrob::AssetLocation loc = lrob::stability_report(fr, line);
        out["stability"] = {{"k_ll", loc.k_ll},     {"k_lr", loc.k_lr},
                            {"ratio", loc.ratio},   {"zeta_c", loc.zeta_c},
                            {"margin", loc.margin}, {"stable", loc.stable}};
    }
    write_text(ctx.path("fit.json"), out.dump(2) + "\n");
    lrob::write_fit_csv(profile, fr, ctx.path("summary.csv"));
    return kOk;
}

int run(const std::string& cmd, const GlobalFlags& g) {
    json resolved = default_config(cmd);
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in)
            throw std::invalid_argument("cannot open config: " +
                                        g.config_path);
        json user;
        try {
            user = json::parse(in);
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(std::string("bad config JSON: ") +
                                        e.what());
        }
        if (!user.is_object())
            throw std::invalid_argument("config must be a JSON object");
        resolved.merge_patch(user);
    }

    // flag overrides land in the resolved config so the digest sees them
    if (g.seed_set) {
        if (resolved.contains("sim")) resolved["sim"]["seed"] = g.seed;
    }
    if (g.workers > 0) {
        if (resolved.contains("sweep"))
            resolved["sweep"]["workers"] = g.workers;
        if (resolved.contains("fit")) resolved["fit"]["workers"] = g.workers;
        if (cmd == "impact") resolved["workers"] = g.workers;
    }
    if (cmd == "calibrate") {
        for (const std::string& f : g.files) resolved["files"].push_back(f);
    }

    if (g.dry_run) {
        std::cout << resolved.dump(2) << '\n';
        return kOk;
    }

    std::filesystem::create_directories(g.out_dir);
    RunContext ctx;
    ctx.command = cmd;
    ctx.out_dir = g.out_dir;
    ctx.digest = hex64(fnv1a64(resolved.dump()));
    ctx.seed = g.seed_set ? g.seed : 0;

    int code = kOk;
    if (cmd == "stationary") {
        code = cmd_stationary(resolved, ctx);
    } else if (cmd == "simulate") {
        code = cmd_simulate(resolved, ctx);
    } else if (cmd == "map") {
        code = cmd_map(resolved, ctx);
    } else if (cmd == "impact") {
        code = cmd_impact(resolved, ctx);
    } else {
        code = cmd_calibrate(resolved, ctx);
    }
    ctx.write_manifest();
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent/revealed order book laboratory"};
    app.require_subcommand(1);

    GlobalFlags g;
    const char* names[] = {"stationary", "simulate", "map", "impact",
                           "calibrate"};
    const char* descs[] = {
        "stationary book profiles (closed forms or finite differences)",
        "stochastic particle run: price series, volatility, averaged book",
        "stability sweep over (k*l_latent, k*l_revealed) plus critical line",
        "metaorder ensemble: impact trajectory and exponent report",
        "fit model parameters to order book snapshot CSVs"};
    for (int i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", g.config_path,
                        "JSON config overlaying the defaults")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", g.out_dir, "output directory")
            ->capture_default_str();
        sub->add_option("--seed", g.seed, "master RNG seed override")
            ->each([&g](const std::string&) { g.seed_set = true; });
        sub->add_option("--workers", g.workers, "worker thread override")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--dry-run", g.dry_run,
                      "print the resolved config and exit");
        if (std::string(names[i]) == "calibrate")
            sub->add_option("files", g.files, "snapshot CSV files");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, g);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericFailure;
    }
}
