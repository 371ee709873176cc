#include "lrob/stability_map.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace lrob {

void SweepConfig::validate() const {
    if (n_ll < 2 || n_lr < 2)
        throw std::invalid_argument("sweep grid needs at least 2x2 cells");
    if (!(coord_min > 0.0))
        throw std::invalid_argument("coord_min must be > 0");
    if (!(coord_max > coord_min))
        throw std::invalid_argument("coord_max must exceed coord_min");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

std::vector<double> log_spaced(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo))
        throw std::invalid_argument("log_spaced needs 0 < lo < hi");
    if (n < 2) throw std::invalid_argument("log_spaced needs n >= 2");
    std::vector<double> xs(static_cast<std::size_t>(n));
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    xs.front() = lo;
    xs.back() = hi;
    return xs;
}

StabilityCell evaluate_cell(double k_ll, double k_lr, const BvpConfig& bvp) {
    StabilityCell cell;
    cell.k_ll = k_ll;
    cell.k_lr = k_lr;
    ModelParams p;
    p.D_latent = k_ll * k_ll; // L = k = omega = 1 internal units
    p.D_revealed = k_lr * k_lr;
    p.omega_reveal = 1.0;
    p.omega_unreveal = 1.0;
    p.k = 1.0;
    p.L_latent = 1.0;
    try {
        const BvpSolution sol = solve_stationary(p, bvp);
        cell.slope0 = slope_at_origin(sol.profile);
        cell.overlap0 = overlap_proxy(sol.profile);
        cell.vol_revealed = revealed_volume(sol.profile);
        cell.stable = cell.slope0 < 0.0;
    } catch (const std::exception&) {
        cell.solver_ok = false;
    }
    return cell;
}

std::vector<StabilityCell> sweep(const SweepConfig& cfg) {
    cfg.validate();
    const std::vector<double> ll =
        log_spaced(cfg.coord_min, cfg.coord_max, cfg.n_ll);
    const std::vector<double> lr =
        log_spaced(cfg.coord_min, cfg.coord_max, cfg.n_lr);
    std::vector<StabilityCell> cells(ll.size() * lr.size());
    auto work = [&](std::size_t idx) {
        const std::size_t i_ll = idx % ll.size();
        const std::size_t i_lr = idx / ll.size();
        cells[idx] = evaluate_cell(ll[i_ll], lr[i_lr], cfg.bvp);
    };
    const std::size_t total = cells.size();
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), total);
    if (n_workers <= 1) {
        for (std::size_t idx = 0; idx < total; ++idx) work(idx);
        return cells;
    }
    // cells are indexed by grid position, so output order does not depend on
    // which worker handles which cell
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t idx = next.fetch_add(1); idx < total;
                 idx = next.fetch_add(1))
                work(idx);
        });
    }
    for (std::thread& t : pool) t.join();
    return cells;
}

namespace {

// Sign functional for the root find: the revealed slope at the origin, or the
// revealed gap when the revealed book does not diffuse (where the slope is
// replaced by a jump).
double stability_functional(double zeta, double ratio, const BvpConfig& bvp) {
    ModelParams p;
    p.D_latent = zeta * zeta;
    p.D_revealed = ratio * ratio * zeta * zeta;
    p.omega_reveal = 1.0;
    p.omega_unreveal = 1.0;
    p.k = 1.0;
    p.L_latent = 1.0;
    const BvpSolution sol = solve_stationary(p, bvp);
    if (p.D_revealed == 0.0) return sol.profile.phi_revealed.front();
    return slope_at_origin(sol.profile);
}

} // namespace

double critical_zeta_numeric(double ratio, double tol_zeta,
                             const BvpConfig& bvp) {
    if (ratio < 0.0) throw std::invalid_argument("ratio must be >= 0");
    if (!(tol_zeta > 0.0)) throw std::invalid_argument("tol_zeta must be > 0");
    double lo = 0.5;
    double hi = 3.0;
    double f_lo = stability_functional(lo, ratio, bvp);
    double f_hi = stability_functional(hi, ratio, bvp);
    if (!(f_lo < 0.0) || !(f_hi > 0.0))
        throw std::runtime_error("critical zeta not bracketed on [0.5, 3]");
    while (hi - lo > tol_zeta) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = stability_functional(mid, ratio, bvp);
        if (f_mid < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    return 0.5 * (lo + hi);
}

double CriticalLine::zeta_at(double ratio) const {
    if (points.empty())
        throw std::invalid_argument("critical line has no points");
    if (ratio <= points.front().ratio) return points.front().zeta_c;
    if (ratio >= points.back().ratio) return points.back().zeta_c;
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (ratio <= points[i].ratio) {
            const CriticalPoint& a = points[i - 1];
            const CriticalPoint& b = points[i];
            const double t = (ratio - a.ratio) / (b.ratio - a.ratio);
            return a.zeta_c + t * (b.zeta_c - a.zeta_c);
        }
    }
    return points.back().zeta_c;
}

CriticalLine critical_line(const std::vector<double>& ratios, double tol_zeta,
                           const BvpConfig& bvp) {
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    CriticalLine line;
    for (double r : sorted) {
        try {
            const double zc = critical_zeta_numeric(r, tol_zeta, bvp);
            line.points.push_back({r, zc, r * zc});
        } catch (const std::runtime_error&) {
            // unbracketed ratio: excluded from the line
        }
    }
    if (line.points.empty())
        throw std::runtime_error("no ratio produced a bracketed critical zeta");
    return line;
}

std::vector<double> default_ratio_grid(int n) {
    return log_spaced(0.01, 1.0, n);
}

AssetLocation locate_asset(double k, double l_latent, double l_revealed,
                           const CriticalLine& line) {
    if (!(k > 0.0) || !(l_latent > 0.0) || l_revealed < 0.0)
        throw std::invalid_argument("asset parameters must be positive");
    AssetLocation loc;
    loc.k_ll = k * l_latent;
    loc.k_lr = k * l_revealed;
    loc.ratio = l_revealed / l_latent;
    loc.zeta_c = line.zeta_at(loc.ratio);
    loc.margin = loc.zeta_c - loc.k_ll;
    loc.stable = loc.margin > 0.0;
    return loc;
}

void write_sweep_csv(const std::vector<StabilityCell>& cells,
                     const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "k_ll,k_lr,slope0,overlap0,vol_revealed,stable,solver_ok\n";
    for (const StabilityCell& c : cells) {
        out << format_double(c.k_ll) << ',' << format_double(c.k_lr) << ','
            << format_double(c.slope0) << ',' << format_double(c.overlap0)
            << ',' << format_double(c.vol_revealed) << ','
            << (c.stable ? 1 : 0) << ',' << (c.solver_ok ? 1 : 0) << '\n';
    }
}

void write_critical_csv(const CriticalLine& line, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ratio,zeta_c,k_lr\n";
    for (const CriticalPoint& p : line.points) {
        out << format_double(p.ratio) << ',' << format_double(p.zeta_c) << ','
            << format_double(p.k_lr) << '\n';
    }
}

} // namespace lrob
