#include "lrob/impact.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lrob/stationary_analytic.hpp"
#include "lrob/stationary_bvp.hpp"

namespace lrob {

namespace {

constexpr double pi_sq_6 = std::numbers::pi * std::numbers::pi / 6.0;

// (expm1(x) - x) / x^2, stable through x = 0.
double expm1_quad(double x) {
    if (std::abs(x) < 1e-3) {
        return 0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0));
    }
    return (std::expm1(x) - x) / (x * x);
}

double dilog_series(double y) {
    double term = y;
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double add = term / (static_cast<double>(k) * k);
        sum += add;
        if (add < 1e-17 * (1.0 + sum)) break;
        term *= y;
    }
    return sum;
}

} // namespace

double dilogarithm(double y) {
    if (!(y >= 0.0) || !(y <= 1.0))
        throw std::domain_error("dilogarithm needs y in [0, 1]");
    if (y == 1.0) return pi_sq_6;
    if (y <= 0.5) return dilog_series(y);
    const double rest = 1.0 - y;
    return pi_sq_6 - std::log1p(-rest) * std::log(rest) - dilog_series(rest);
}

namespace detail {

double q_tilde_zero_dr(double u, double zeta) {
    if (u < 0.0) throw std::invalid_argument("u must be >= 0");
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be > 0");
    if (u == 0.0) return 0.0;
    // Equivalent to u ln(1-e^-u) - Li2(e^-u) + Li2(1) - (zeta^2/2)(1-e^-u/zeta)
    // after reflecting the dilogarithm; the log terms cancel exactly, and
    // expm1 keeps the small-u regime to full precision.
    return dilogarithm(-std::expm1(-u)) +
           0.5 * zeta * zeta * std::expm1(-u / zeta);
}

double q_tilde_equal_d_raw(double u, double zeta) {
    const double g = g_factor(zeta);
    const double alpha = 1.0 / (zeta * zeta - 1.0);
    const double b = 2.0 * alpha * zeta * zeta;
    const double zg = g / (zeta + 2.0); // zeta * gamma
    const double ze = 0.5 * g * zeta;   // zeta^2 * eta
    const double ez = std::exp(-u / zeta);
    return alpha * ((u + b + 1.0) * std::exp(-u) - (b + 1.0)) +
           (zg / (1.0 + zeta)) * std::expm1(-u * (1.0 + 1.0 / zeta)) +
           0.5 * g * u * ez -
           (ze - alpha * b * zeta - zg) * (1.0 - ez);
}

double q_tilde_equal_d_stable(double u, double zeta) {
    const double g = g_factor(zeta);
    const double eps = zeta - 1.0;
    const double two_eps = 2.0 + eps;
    // the 1/(zeta^2 - 1) poles of the raw coefficients cancel identically;
    // regrouping around expm1(u eps / zeta) removes them before any rounding
    const double a = u < 0.5
                         ? u * u * (1.0 - (1.0 + u) * expm1_quad(-u))
                         : -std::expm1(-u) - u * std::exp(-u);
    const double delta = u * eps / zeta;
    double h_term;  // 2 zeta u^2 e^-u (expm1(delta) - delta)/delta^2
    if (std::abs(delta) > 500.0) {
        const double r = zeta / eps;
        h_term = 2.0 * zeta * r * r *
                 (std::exp(-u / zeta) - (1.0 + delta) * std::exp(-u));
    } else {
        h_term = 2.0 * zeta * u * u * std::exp(-u) * expm1_quad(delta);
    }
    const double core = (a * (3.0 + 2.0 * eps) - h_term) / (two_eps * two_eps);
    const double zg = g / (zeta + 2.0);
    return core - (zg - 0.5 * g * zeta) * std::expm1(-u / zeta) +
           (zg / (1.0 + zeta)) * std::expm1(-u * (1.0 + 1.0 / zeta)) +
           0.5 * g * u * std::exp(-u / zeta);
}

double q_tilde_equal_d(double u, double zeta) {
    if (u < 0.0) throw std::invalid_argument("u must be >= 0");
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be > 0");
    if (u == 0.0) return 0.0;
    if (std::abs(zeta - 1.0) < 1e-2) return q_tilde_equal_d_stable(u, zeta);
    return q_tilde_equal_d_raw(u, zeta);
}

double v_tilde_zero_dr(double zeta) {
    return pi_sq_6 - 0.5 * zeta * zeta;
}

double v_tilde_equal_d(double zeta) {
    const double g = g_factor(zeta);
    const double eps = zeta - 1.0;
    const double two_eps = 2.0 + eps;
    return (3.0 + 2.0 * eps) / (two_eps * two_eps) + g / (zeta + 2.0) -
           0.5 * g * zeta - g / ((zeta + 2.0) * (1.0 + zeta));
}

} // namespace detail

namespace {

void require_zero_dr(const ModelParams& p) {
    p.validate();
    if (p.D_revealed != 0.0)
        throw std::invalid_argument("closed form requires D_revealed = 0");
}

void require_equal_d(const ModelParams& p) {
    p.validate();
    if (p.D_revealed != p.D_latent || !p.equal_rates())
        throw std::invalid_argument(
            "closed form requires D_revealed = D_latent and equal rates");
}

} // namespace

double swept_volume_zero_dr(const ModelParams& p, double price) {
    require_zero_dr(p);
    const double ratio = p.omega_reveal / p.omega_unreveal;
    return ratio * p.L_latent / (p.k * p.k) *
           detail::q_tilde_zero_dr(p.k * price, p.zeta_latent());
}

double swept_volume_equal_d(const ModelParams& p, double price) {
    require_equal_d(p);
    return p.L_latent / (p.k * p.k) *
           detail::q_tilde_equal_d(p.k * price, p.zeta_latent());
}

double revealed_volume_available(const ModelParams& p) {
    p.validate();
    const double scale = p.L_latent / (p.k * p.k);
    double v = 0.0;
    if (p.D_revealed == 0.0) {
        v = (p.omega_reveal / p.omega_unreveal) * scale *
            detail::v_tilde_zero_dr(p.zeta_latent());
    } else if (p.D_revealed == p.D_latent && p.equal_rates()) {
        v = scale * detail::v_tilde_equal_d(p.zeta_latent());
    } else {
        return revealed_volume(solve_stationary(p).profile);
    }
    if (!(v > 0.0))
        throw std::domain_error(
            "book too close to its stability threshold: no revealed volume");
    return v;
}

namespace {

// Bisection of a continuous increasing map q on [0, inf) with q(0) = 0.
// `available` bounds the attainable volume when known (zeta <= 1); past it
// the growth loop detects saturation instead.
template <typename Q>
double invert_swept_volume(const Q& q, double target, double available,
                           double scale) {
    if (target < 0.0) throw std::invalid_argument("volume must be >= 0");
    if (target == 0.0) return 0.0;
    if (target >= available)
        throw std::domain_error(
            "volume reaches the available revealed volume: impact diverges");
    double lo = 0.0;
    double q_lo = 0.0;
    double hi = scale;
    double q_hi = q(hi);
    for (int grow = 0; q_hi < target; ++grow) {
        if (grow > 200 || !(q_hi > q_lo))
            throw std::domain_error(
                "volume reaches the available revealed volume: impact "
                "diverges");
        lo = hi;
        q_lo = q_hi;
        hi *= 2.0;
        q_hi = q(hi);
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double q_mid = q(mid);
        if (std::abs(q_mid - target) <= 1e-10 * target) return mid;
        if (q_mid < target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace

double geometric_impact_zero_dr(const ModelParams& p, double Q) {
    require_zero_dr(p);
    const double zeta = p.zeta_latent();
    const double available =
        zeta <= 1.0 ? (p.omega_reveal / p.omega_unreveal) * p.L_latent /
                          (p.k * p.k) * detail::v_tilde_zero_dr(zeta)
                    : std::numeric_limits<double>::infinity();
    return invert_swept_volume(
        [&](double price) { return swept_volume_zero_dr(p, price); }, Q,
        available, 1.0 / p.k);
}

double geometric_impact_equal_d(const ModelParams& p, double Q) {
    require_equal_d(p);
    const double zeta = p.zeta_latent();
    const double available =
        zeta <= 1.0
            ? p.L_latent / (p.k * p.k) * detail::v_tilde_equal_d(zeta)
            : std::numeric_limits<double>::infinity();
    return invert_swept_volume(
        [&](double price) { return swept_volume_equal_d(p, price); }, Q,
        available, 1.0 / p.k);
}

double short_time_impact_sqrt(const ModelParams& p, double Q) {
    require_equal_d(p);
    if (Q < 0.0) throw std::invalid_argument("volume must be >= 0");
    const double slope = phi_tilde_slope0(p.zeta_latent());
    if (!(slope < 0.0))
        throw std::domain_error("book beyond the stability threshold");
    return std::sqrt(2.0 * Q / (p.L_latent * -slope));
}

double short_time_impact_linear(const ModelParams& p, double Q) {
    require_zero_dr(p);
    if (Q < 0.0) throw std::invalid_argument("volume must be >= 0");
    const double gap = 1.0 - 0.5 * p.zeta_latent();
    if (!(gap > 0.0))
        throw std::domain_error("book beyond the stability threshold");
    const double ratio = p.omega_reveal / p.omega_unreveal;
    return p.k * Q / (ratio * p.L_latent * gap);
}

double llob_reference(const ModelParams& p, double Q, LlobRegime regime,
                      double m0) {
    p.validate();
    if (Q < 0.0) throw std::invalid_argument("volume must be >= 0");
    if (regime == LlobRegime::fast) return std::sqrt(2.0 * Q / p.L_latent);
    const double participation = std::abs(m0) / (p.D_latent * p.L_latent);
    return std::sqrt(participation * Q / (std::numbers::pi * p.L_latent));
}

void MetaorderSpec::validate() const {
    if (m0 == 0.0) throw std::invalid_argument("m0 must be nonzero");
    if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
}

double MetaorderSpec::rate_vs_conversion_flux(const ModelParams& p) const {
    return m0 * p.k * p.k / (p.L_latent * p.omega_reveal);
}

double MetaorderSpec::rate_vs_revealed_flux(const ModelParams& p) const {
    return m0 / (p.D_revealed * p.L_latent);
}

double MetaorderSpec::rate_vs_latent_flux(const ModelParams& p) const {
    return m0 / (p.D_latent * p.L_latent);
}

double crossover_time_estimate(const ModelParams& p, double m0) {
    if (m0 == 0.0) throw std::invalid_argument("m0 must be nonzero");
    return revealed_volume_available(p) / std::abs(m0);
}

void MetaorderConfig::validate() const {
    sim.validate();
    order.validate();
    if (ensemble < 1) throw std::invalid_argument("ensemble must be >= 1");
    if (record_stride < 1)
        throw std::invalid_argument("record_stride must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (!(order.duration >= sim.tau))
        throw std::invalid_argument("duration shorter than one step");
}

namespace {

BookProfile stationary_profile_for(const ModelParams& mp) {
    if (mp.D_revealed == 0.0)
        return stationary_zero_dr(mp, default_grid(mp, 2001));
    if (mp.D_revealed == mp.D_latent && mp.equal_rates())
        return stationary_equal_d(mp, default_grid(mp, 2001));
    return solve_stationary(mp).profile;
}

struct MemberSeries {
    std::vector<double> trade;     // absolute trade price per record
    std::vector<double> fair;      // absolute fair price per record
    std::vector<double> imbalance;
    double p0 = 0.0;
    bool truncated = false;
};

double revealed_imbalance(const SimState& s) {
    long long vb = 0;
    long long va = 0;
    for (long long v : s.revealed_bid) vb += v;
    for (long long v : s.revealed_ask) va += v;
    const long long tot = vb + va;
    if (tot == 0) return 0.0;
    return static_cast<double>(vb - va) / static_cast<double>(tot);
}

MemberSeries run_member(const MetaorderConfig& cfg, const BookProfile& book,
                        int member, long long n_steps) {
    SimConfig sim = cfg.sim;
    sim.seed = derive_seed(cfg.sim.seed, static_cast<std::uint64_t>(member));
    MemberSeries out;
    SimState state = initial_state_from_profile(sim, book);
    for (long long i = 0; i < sim.burn_in; ++i) step(state, sim);
    if (state.crisis || state.overflow) {
        out.truncated = true;
        return out;
    }
    out.p0 = state.trade_price;
    out.trade.push_back(state.trade_price);
    out.fair.push_back(fair_price(state, sim));
    out.imbalance.push_back(revealed_imbalance(state));

    const bool buy = cfg.order.m0 > 0.0;
    const double rate = std::abs(cfg.order.m0) * sim.tau;
    double acc = 0.0;
    for (long long i = 1; i <= n_steps; ++i) {
        step(state, sim);
        acc += rate;
        const long long slice = static_cast<long long>(acc);
        acc -= static_cast<double>(slice);
        if (slice > 0) {
            if (buy) {
                execute_market_buy(state, slice);
            } else {
                execute_market_sell(state, slice);
            }
            const double price = trade_price(state, sim);
            if (std::isfinite(price)) {
                state.trade_price = price;
                const int n = sim.n_bins;
                state.overflow = best_bid_bin(state) <= 0 ||
                                 best_ask_bin(state) >= n - 1;
            } else {
                state.crisis = true;
            }
        }
        if (state.crisis || state.overflow) {
            out.truncated = true;
            break;
        }
        if (i % cfg.record_stride == 0) {
            out.trade.push_back(state.trade_price);
            out.fair.push_back(fair_price(state, sim));
            out.imbalance.push_back(revealed_imbalance(state));
        }
    }
    return out;
}

} // namespace

ImpactTrajectory run_metaorder(const MetaorderConfig& cfg) {
    cfg.validate();
    const ModelParams mp = cfg.sim.model();
    const BookProfile book = stationary_profile_for(mp);
    const long long n_steps =
        static_cast<long long>(std::llround(cfg.order.duration / cfg.sim.tau));

    std::vector<MemberSeries> members(static_cast<std::size_t>(cfg.ensemble));
    const std::size_t total = members.size();
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), total);
    if (n_workers <= 1) {
        for (std::size_t m = 0; m < total; ++m)
            members[m] = run_member(cfg, book, static_cast<int>(m), n_steps);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t m = next.fetch_add(1); m < total;
                     m = next.fetch_add(1))
                    members[m] =
                        run_member(cfg, book, static_cast<int>(m), n_steps);
            });
        }
        for (std::thread& t : pool) t.join();
    }

    ImpactTrajectory traj;
    traj.order = cfg.order;
    traj.ensemble = cfg.ensemble;
    std::size_t common = std::numeric_limits<std::size_t>::max();
    for (const MemberSeries& m : members) {
        common = std::min(common, m.trade.size());
        traj.crisis = traj.crisis || m.truncated;
        if (!m.truncated) ++traj.completed;
    }
    if (common == std::numeric_limits<std::size_t>::max()) common = 0;

    const double m_count = static_cast<double>(members.size());
    for (std::size_t i = 0; i < common; ++i) {
        const double t =
            static_cast<double>(i) * cfg.record_stride * cfg.sim.tau;
        traj.t.push_back(t);
        traj.q.push_back(cfg.order.m0 * t);
        double sum = 0.0;
        double sq = 0.0;
        double fair_sum = 0.0;
        double imb_sum = 0.0;
        double dist_sum = 0.0;
        for (const MemberSeries& m : members) {
            const double impact = m.trade[i] - m.p0;
            sum += impact;
            sq += impact * impact;
            fair_sum += m.fair[i] - m.p0;
            imb_sum += m.imbalance[i];
            const double den = std::abs(impact);
            dist_sum += den > 0.0 ? std::abs(m.trade[i] - m.fair[i]) / den : 0.0;
        }
        const double mean = sum / m_count;
        traj.impact_mean.push_back(mean);
        double se = 0.0;
        if (members.size() > 1) {
            const double var =
                std::max(0.0, (sq / m_count - mean * mean) * m_count /
                                  (m_count - 1.0));
            se = std::sqrt(var / m_count);
        }
        traj.impact_stderr.push_back(se);
        traj.fair_mean.push_back(fair_sum / m_count);
        traj.imbalance_mean.push_back(imb_sum / m_count);
        traj.fair_distance_mean.push_back(dist_sum / m_count);
    }
    return traj;
}

double fit_impact_exponent(const ImpactTrajectory& traj, double q_min,
                           double q_max) {
    if (!(q_min > 0.0) || !(q_max > q_min))
        throw std::invalid_argument("need 0 < q_min < q_max");
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < traj.q.size(); ++i) {
        const double q = std::abs(traj.q[i]);
        if (q < q_min || q > q_max) continue;
        const double impact = traj.order.m0 > 0.0 ? traj.impact_mean[i]
                                                  : -traj.impact_mean[i];
        if (!(impact > 0.0))
            throw std::invalid_argument("nonpositive impact in fit window");
        const double x = std::log(q);
        const double y = std::log(impact);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) throw std::invalid_argument("fit window holds fewer than 2 points");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_trajectory_csv(const ImpactTrajectory& traj,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,q,price_mean,price_stderr,fair_price_mean,imbalance_mean,"
           "fair_distance_mean\n";
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        out << format_double(traj.t[i]) << ',' << format_double(traj.q[i])
            << ',' << format_double(traj.impact_mean[i]) << ','
            << format_double(traj.impact_stderr[i]) << ','
            << format_double(traj.fair_mean[i]) << ','
            << format_double(traj.imbalance_mean[i]) << ','
            << format_double(traj.fair_distance_mean[i]) << '\n';
    }
}

std::string impact_metadata_json(const MetaorderConfig& cfg,
                                 const ImpactTrajectory& traj) {
    const ModelParams mp = cfg.sim.model();
    nlohmann::json j;
    j["m0"] = cfg.order.m0;
    j["duration"] = cfg.order.duration;
    j["ensemble"] = cfg.ensemble;
    j["completed"] = traj.completed;
    j["crisis"] = traj.crisis;
    j["records"] = traj.t.size();
    j["record_stride"] = cfg.record_stride;
    j["master_seed"] = cfg.sim.seed;
    j["m0_over_conversion_flux"] = cfg.order.rate_vs_conversion_flux(mp);
    const double vs_revealed = cfg.order.rate_vs_revealed_flux(mp);
    if (std::isfinite(vs_revealed)) {
        j["m0_over_revealed_flux"] = vs_revealed;
    } else {
        j["m0_over_revealed_flux"] = nullptr; // frozen revealed book
    }
    j["m0_over_latent_flux"] = cfg.order.rate_vs_latent_flux(mp);
    return j.dump(2) + "\n";
}

} // namespace lrob
