#include "lrob/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "lrob/profile.hpp"

namespace lrob {

void IngestConfig::validate() const {
    if (!(bin_width > 0.0))
        throw std::invalid_argument("bin_width must be > 0");
    if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
    if (!(tick_size > 0.0))
        throw std::invalid_argument("tick_size must be > 0");
    if (daily_volume < 0.0)
        throw std::invalid_argument("daily_volume must be >= 0");
}

void FitConfig::validate() const {
    if (n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
    if (max_iterations < 1)
        throw std::invalid_argument("max_iterations must be >= 1");
    if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be > 0");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("tolerance must be > 0");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

int EmpiricalBookProfile::informative_bins() const {
    int n = 0;
    for (double d : density)
        if (d > 0.0) ++n;
    return n;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool split4(const std::string& line, std::array<std::string, 4>& out) {
    std::size_t pos = 0;
    for (int f = 0; f < 4; ++f) {
        const std::size_t comma = line.find(',', pos);
        const bool last = f == 3;
        if (last != (comma == std::string::npos)) return false;
        out[static_cast<std::size_t>(f)] =
            trim(last ? line.substr(pos) : line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return true;
}

bool parse_positive(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v) || !(v > 0.0)) return false;
    out = v;
    return true;
}

// true when the row parsed cleanly and satisfies the record invariants
bool parse_row(const std::string& line, SnapshotRecord& rec) {
    std::array<std::string, 4> f;
    if (!split4(line, f)) return false;
    if (f[0].empty()) return false;
    if (f[1] == "B") {
        rec.side = BookSide::bid;
    } else if (f[1] == "A") {
        rec.side = BookSide::ask;
    } else {
        return false;
    }
    if (!parse_positive(f[2], rec.price)) return false;
    if (!parse_positive(f[3], rec.size)) return false;
    rec.timestamp = f[0];
    return true;
}

constexpr const char* kHeader = "timestamp,side,price,size";

struct RawSnapshot {
    std::vector<SnapshotRecord> rows;
    bool poisoned = false;
};

// groups records by timestamp in first-appearance order
class SnapshotGrouper {
public:
    RawSnapshot& at(const std::string& stamp) {
        auto [it, inserted] = index_.try_emplace(stamp, snaps_.size());
        if (inserted) snaps_.emplace_back();
        return snaps_[it->second];
    }
    std::vector<RawSnapshot> take() { return std::move(snaps_); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<RawSnapshot> snaps_;
};

EmpiricalBookProfile fold_snapshots(const std::vector<RawSnapshot>& snaps,
                                    const IngestConfig& cfg) {
    cfg.validate();
    struct Valid {
        const RawSnapshot* snap;
        double best_bid;
        double best_ask;
    };
    std::vector<Valid> valid;
    int skipped = 0;
    for (const RawSnapshot& s : snaps) {
        if (s.poisoned) {
            ++skipped;
            continue;
        }
        double best_bid = -std::numeric_limits<double>::infinity();
        double best_ask = std::numeric_limits<double>::infinity();
        bool bad = false;
        for (const SnapshotRecord& r : s.rows) {
            if (!std::isfinite(r.price) || !(r.price > 0.0) ||
                !std::isfinite(r.size) || !(r.size > 0.0)) {
                bad = true;
                break;
            }
            if (r.side == BookSide::bid) {
                best_bid = std::max(best_bid, r.price);
            } else {
                best_ask = std::min(best_ask, r.price);
            }
        }
        if (bad || !std::isfinite(best_bid) || !std::isfinite(best_ask) ||
            best_bid >= best_ask) {
            ++skipped;
            continue;
        }
        valid.push_back({&s, best_bid, best_ask});
    }
    if (valid.empty())
        throw std::runtime_error("no valid snapshots to fold");

    double price_sum = 0.0;
    double spread_sum = 0.0;
    for (const Valid& v : valid) {
        price_sum += 0.5 * (v.best_bid + v.best_ask);
        spread_sum += v.best_ask - v.best_bid;
    }
    const double n_valid = static_cast<double>(valid.size());
    const double avg_price = price_sum / n_valid;

    EmpiricalBookProfile out;
    out.snapshots = static_cast<int>(valid.size());
    out.skipped = skipped;
    out.average_price = avg_price;
    out.average_spread_ticks = spread_sum / n_valid / cfg.tick_size;
    out.daily_volume = cfg.daily_volume;

    const std::size_t n = static_cast<std::size_t>(cfg.n_bins);
    const double width_abs = cfg.bin_width * avg_price / 100.0;
    out.offset.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.offset[i] = (static_cast<double>(i) + 0.5) * cfg.bin_width;

    // Welford over snapshots of the per-bin one-side density
    std::vector<double> mean(n, 0.0), m2(n, 0.0), tmp(n);
    long long count = 0;
    for (const Valid& v : valid) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (const SnapshotRecord& r : v.snap->rows) {
            const double off = r.side == BookSide::ask ? r.price - v.best_bid
                                                       : v.best_ask - r.price;
            const auto idx = static_cast<long long>(std::floor(off / width_abs));
            if (idx < 0 || idx >= cfg.n_bins) continue;
            tmp[static_cast<std::size_t>(idx)] += 0.5 * r.size;
        }
        ++count;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = tmp[i] / cfg.bin_width;
            const double delta = d - mean[i];
            mean[i] += delta / static_cast<double>(count);
            m2[i] += delta * (d - mean[i]);
        }
    }
    out.density = std::move(mean);
    out.density_var.assign(n, 0.0);
    if (count > 1)
        for (std::size_t i = 0; i < n; ++i)
            out.density_var[i] = m2[i] / static_cast<double>(count - 1);
    return out;
}

} // namespace

std::vector<SnapshotRecord> read_snapshot_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kHeader)
        throw std::runtime_error(path + ": missing snapshot header");
    std::vector<SnapshotRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        SnapshotRecord rec;
        if (!parse_row(line, rec))
            throw std::runtime_error(path + ": malformed row " +
                                     std::to_string(row));
        records.push_back(std::move(rec));
    }
    return records;
}

EmpiricalBookProfile ingest_snapshots(const std::vector<std::string>& files,
                                      const IngestConfig& cfg) {
    std::vector<RawSnapshot> all;
    for (const std::string& path : files) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        std::string line;
        if (!std::getline(in, line) || trim(line) != kHeader)
            throw std::runtime_error(path + ": missing snapshot header");
        SnapshotGrouper groups;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            SnapshotRecord rec;
            if (parse_row(line, rec)) {
                groups.at(rec.timestamp).rows.push_back(std::move(rec));
            } else {
                // attach the damage to the row's snapshot when it names one
                std::array<std::string, 4> f;
                const std::string stamp =
                    split4(line, f) ? f[0] : std::string();
                groups.at(stamp).poisoned = true;
            }
        }
        std::vector<RawSnapshot> snaps = groups.take();
        std::move(snaps.begin(), snaps.end(), std::back_inserter(all));
    }
    return fold_snapshots(all, cfg);
}

EmpiricalBookProfile ingest_records(const std::vector<SnapshotRecord>& records,
                                    const IngestConfig& cfg) {
    SnapshotGrouper groups;
    for (const SnapshotRecord& rec : records)
        groups.at(rec.timestamp).rows.push_back(rec);
    const std::vector<RawSnapshot> all = groups.take();
    return fold_snapshots(all, cfg);
}

namespace {

struct FitData {
    std::vector<double> x;
    std::vector<double> d;
    std::vector<double> w;
    const BvpConfig* bvp;
};

struct EvalOut {
    double ssr = std::numeric_limits<double>::infinity();
    double L = 0.0;
    double weighted_m_sq = 0.0;
    std::vector<double> r;
};

// theta = (ln k, ln l_latent, ln l_revealed); unit depth and rates, so the
// model density is L * |phi(x)| with L profiled out linearly
EvalOut eval_theta(const FitData& fd, const std::array<double, 3>& th) {
    EvalOut out;
    for (double t : th)
        if (!std::isfinite(t) || std::abs(t) > 30.0) return out;
    ModelParams p;
    p.k = std::exp(th[0]);
    const double ll = std::exp(th[1]);
    const double lr = std::exp(th[2]);
    p.D_latent = ll * ll;
    p.D_revealed = lr * lr;
    p.omega_reveal = 1.0;
    p.omega_unreveal = 1.0;
    p.L_latent = 1.0;
    BvpSolution sol;
    try {
        p.validate();
        sol = solve_stationary(p, *fd.bvp);
    } catch (const std::exception&) {
        return out;
    }
    const std::size_t n = fd.x.size();
    std::vector<double> m(n);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = std::abs(sol.profile.phi_at(fd.x[i]));
        num += fd.w[i] * fd.d[i] * m[i];
        den += fd.w[i] * m[i] * m[i];
    }
    if (!(den > 0.0) || !(num > 0.0)) return out;
    out.L = num / den;
    out.weighted_m_sq = den;
    out.r.resize(n);
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.r[i] = fd.d[i] - out.L * m[i];
        ssr += fd.w[i] * out.r[i] * out.r[i];
    }
    out.ssr = ssr;
    return out;
}

// residual Jacobian (including the reprofiled L) by central differences;
// false when a probe leaves the solvable region
bool residual_jacobian(const FitData& fd, const std::array<double, 3>& th,
                       double h, std::array<std::vector<double>, 3>& J) {
    for (std::size_t p = 0; p < 3; ++p) {
        std::array<double, 3> tp = th, tm = th;
        tp[p] += h;
        tm[p] -= h;
        const EvalOut ep = eval_theta(fd, tp);
        const EvalOut em = eval_theta(fd, tm);
        if (!std::isfinite(ep.ssr) || !std::isfinite(em.ssr)) return false;
        J[p].resize(fd.x.size());
        for (std::size_t i = 0; i < fd.x.size(); ++i)
            J[p][i] = (ep.r[i] - em.r[i]) / (2.0 * h);
    }
    return true;
}

bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3>& b) {
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0) return false;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < 3; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int cc = c; cc < 3; ++cc) a[r][cc] -= f * a[c][cc];
            b[r] -= f * b[c];
        }
    }
    for (int c = 2; c >= 0; --c) {
        for (int cc = c + 1; cc < 3; ++cc) b[c] -= a[c][cc] * b[cc];
        b[c] /= a[c][c];
    }
    return true;
}

struct StartResult {
    double ssr = std::numeric_limits<double>::infinity();
    std::array<double, 3> theta{};
    double L = 0.0;
    bool converged = false;
    int iterations = 0;
};

StartResult run_start(const FitData& fd, std::array<double, 3> th,
                      const FitConfig& cfg) {
    StartResult res;
    EvalOut cur = eval_theta(fd, th);
    if (!std::isfinite(cur.ssr)) return res;
    double lambda = 1e-3;
    int stall = 0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        res.iterations = it + 1;
        std::array<std::vector<double>, 3> J;
        if (!residual_jacobian(fd, th, cfg.fd_step, J)) break;
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        for (std::size_t i = 0; i < fd.x.size(); ++i) {
            for (int p = 0; p < 3; ++p) {
                const double jp = J[static_cast<std::size_t>(p)][i];
                jtr[static_cast<std::size_t>(p)] += fd.w[i] * jp * cur.r[i];
                for (int q = p; q < 3; ++q)
                    jtj[static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(q)] +=
                        fd.w[i] * jp * J[static_cast<std::size_t>(q)][i];
            }
        }
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < p; ++q)
                jtj[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] =
                    jtj[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)];

        bool accepted = false;
        std::array<double, 3> step{};
        for (int attempt = 0; attempt < 30; ++attempt) {
            std::array<std::array<double, 3>, 3> a = jtj;
            for (int p = 0; p < 3; ++p)
                a[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)] *=
                    1.0 + lambda;
            std::array<double, 3> delta = jtr;
            if (!solve3(a, delta)) {
                lambda *= 8.0;
                continue;
            }
            std::array<double, 3> cand = th;
            for (int p = 0; p < 3; ++p)
                cand[static_cast<std::size_t>(p)] -=
                    delta[static_cast<std::size_t>(p)];
            const EvalOut next = eval_theta(fd, cand);
            if (next.ssr < cur.ssr) {
                th = cand;
                step = delta;
                const double gain = cur.ssr - next.ssr;
                cur = next;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                stall = gain <= cfg.tolerance * (cur.ssr + 1e-300) ? stall + 1
                                                                   : 0;
                break;
            }
            lambda *= 8.0;
            if (lambda > 1e12) break;
        }
        if (!accepted) {
            res.converged = true;  // no descent direction left
            break;
        }
        const double step_inf = std::max(
            {std::abs(step[0]), std::abs(step[1]), std::abs(step[2])});
        if (step_inf < 1e-9 || stall >= 2) {
            res.converged = true;
            break;
        }
    }
    res.ssr = cur.ssr;
    res.theta = th;
    res.L = cur.L;
    return res;
}

} // namespace

FitResult fit(const EmpiricalBookProfile& profile, const BvpConfig& solver,
              const FitConfig& cfg) {
    cfg.validate();
    if (profile.offset.size() != profile.density.size())
        throw std::invalid_argument("profile arrays must have equal length");
    if (profile.informative_bins() < 20)
        throw std::invalid_argument(
            "profile too degenerate to fit: fewer than 20 informative bins");

    // bins where no volume was ever observed (below the touch, beyond the
    // quoted ladder) carry no information about the book shape; treating
    // them as measured zeros would bias the fit, so they are dropped
    FitData fd;
    fd.bvp = &solver;
    std::vector<double> var_kept;
    const bool has_var = profile.density_var.size() == profile.offset.size();
    for (std::size_t i = 0; i < profile.offset.size(); ++i) {
        if (!(profile.density[i] > 0.0)) continue;
        fd.x.push_back(profile.offset[i]);
        fd.d.push_back(profile.density[i]);
        if (has_var) var_kept.push_back(profile.density_var[i]);
    }
    fd.w.assign(fd.x.size(), 1.0);
    if (cfg.weights == FitWeights::inverse_variance && has_var) {
        double vmax = 0.0;
        for (double v : var_kept) vmax = std::max(vmax, v);
        if (vmax > 0.0) {
            const double floor_var = 1e-6 * vmax;
            for (std::size_t i = 0; i < fd.x.size(); ++i)
                fd.w[i] = 1.0 / std::max(var_kept[i], floor_var);
        }
    }

    // density centroid sets the length scale of the starting points
    double cx = 0.0;
    double cd = 0.0;
    for (std::size_t i = 0; i < fd.x.size(); ++i) {
        cx += fd.d[i] * fd.x[i];
        cd += fd.d[i];
    }
    const double scale = cd > 0.0 ? cx / cd : fd.x.back();

    static constexpr std::array<double, 4> zetas{0.1, 0.35, 0.8, 1.4};
    static constexpr std::array<double, 2> ratios{0.12, 0.7};
    std::vector<std::array<double, 3>> starts;
    starts.reserve(static_cast<std::size_t>(cfg.n_starts));
    for (int s = 0; s < cfg.n_starts; ++s) {
        const double zeta = zetas[static_cast<std::size_t>(s) % zetas.size()];
        const double ratio =
            ratios[(static_cast<std::size_t>(s) / zetas.size()) %
                   ratios.size()];
        const double stretch = std::pow(1.5, s / 8);
        const double ll = zeta * scale * stretch;
        starts.push_back({std::log(1.0 / (scale * stretch)), std::log(ll),
                          std::log(ratio * ll)});
    }

    std::vector<StartResult> results(starts.size());
    const std::size_t total = starts.size();
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), total);
    if (n_workers <= 1) {
        for (std::size_t s = 0; s < total; ++s)
            results[s] = run_start(fd, starts[s], cfg);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t s = next.fetch_add(1); s < total;
                     s = next.fetch_add(1))
                    results[s] = run_start(fd, starts[s], cfg);
            });
        }
        for (std::thread& t : pool) t.join();
    }

    int best = -1;
    int converged = 0;
    for (std::size_t s = 0; s < results.size(); ++s) {
        if (!results[s].converged) continue;
        ++converged;
        if (std::isfinite(results[s].ssr) &&
            (best < 0 || results[s].ssr <
                             results[static_cast<std::size_t>(best)].ssr))
            best = static_cast<int>(s);
    }
    if (best < 0)
        throw std::runtime_error("calibration failed: no start converged");
    const StartResult& win = results[static_cast<std::size_t>(best)];

    FitResult out;
    out.k = std::exp(win.theta[0]);
    out.l_latent = std::exp(win.theta[1]);
    out.l_revealed = std::exp(win.theta[2]);
    out.L_latent = win.L;
    out.zeta_latent = out.k * out.l_latent;
    out.zeta_revealed = out.k * out.l_revealed;
    out.starts_converged = converged;
    out.best_start = best;
    out.iterations = win.iterations;

    const EvalOut opt = eval_theta(fd, win.theta);
    const double n_pts = static_cast<double>(fd.x.size());
    out.residual_rms = std::sqrt(opt.ssr / n_pts);
    const double dof = std::max(1.0, n_pts - 4.0);
    const double sigma_sq = opt.ssr / dof;
    if (opt.weighted_m_sq > 0.0)
        out.L_stderr = std::sqrt(sigma_sq / opt.weighted_m_sq);
    std::array<std::vector<double>, 3> J;
    if (residual_jacobian(fd, win.theta, cfg.fd_step, J)) {
        std::array<std::array<double, 3>, 3> jtj{};
        for (std::size_t i = 0; i < fd.x.size(); ++i)
            for (int p = 0; p < 3; ++p)
                for (int q = p; q < 3; ++q)
                    jtj[static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(q)] +=
                        fd.w[i] * J[static_cast<std::size_t>(p)][i] *
                        J[static_cast<std::size_t>(q)][i];
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < p; ++q)
                jtj[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] =
                    jtj[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)];
        for (int p = 0; p < 3; ++p) {
            std::array<double, 3> e{};
            e[static_cast<std::size_t>(p)] = 1.0;
            auto a = jtj;
            if (solve3(a, e) && e[static_cast<std::size_t>(p)] > 0.0)
                out.log_stderr[static_cast<std::size_t>(p)] =
                    std::sqrt(sigma_sq * e[static_cast<std::size_t>(p)]);
        }
    }
    return out;
}

AssetLocation stability_report(const FitResult& fit_result,
                               const CriticalLine& line) {
    return locate_asset(fit_result.k, fit_result.l_latent,
                        fit_result.l_revealed, line);
}

std::string fit_json(const FitResult& fit_result) {
    nlohmann::json j;
    j["L_latent"] = fit_result.L_latent;
    j["k"] = fit_result.k;
    j["l_latent"] = fit_result.l_latent;
    j["l_revealed"] = fit_result.l_revealed;
    j["residual_rms"] = fit_result.residual_rms;
    j["L_stderr"] = fit_result.L_stderr;
    j["log_stderr"] = fit_result.log_stderr;
    j["zeta_latent"] = fit_result.zeta_latent;
    j["zeta_revealed"] = fit_result.zeta_revealed;
    j["starts_converged"] = fit_result.starts_converged;
    j["best_start"] = fit_result.best_start;
    j["iterations"] = fit_result.iterations;
    return j.dump(2) + "\n";
}

void write_fit_csv(const EmpiricalBookProfile& profile, const FitResult& fit_result,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "price,spread_ticks,daily_volume,L_latent,k,l_latent,l_revealed\n"
        << format_double(profile.average_price) << ','
        << format_double(profile.average_spread_ticks) << ','
        << format_double(profile.daily_volume) << ','
        << format_double(fit_result.L_latent) << ','
        << format_double(fit_result.k) << ','
        << format_double(fit_result.l_latent) << ','
        << format_double(fit_result.l_revealed) << '\n';
}

} // namespace lrob
