#include "lrob/particle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lrob {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Fresh distribution per draw so the outcome depends only on (rng, n, p).
long long draw_binomial(std::mt19937_64& rng, long long n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<long long> dist(n, p);
    return dist(rng);
}

// Binomial hop pass with reflecting walls; fixed left-to-right draw order.
void diffuse_book(std::vector<long long>& book, double p,
                  std::mt19937_64& rng, std::vector<long long>& scratch) {
    if (p <= 0.0) return;
    const int n = static_cast<int>(book.size());
    std::fill(scratch.begin(), scratch.end(), 0LL);
    for (int j = 0; j < n; ++j) {
        const long long count = book[static_cast<std::size_t>(j)];
        if (count == 0) continue;
        const long long movers = draw_binomial(rng, count, p);
        const long long left = draw_binomial(rng, movers, 0.5);
        const long long right = movers - left;
        scratch[static_cast<std::size_t>(j)] += count - movers;
        if (j > 0) {
            scratch[static_cast<std::size_t>(j - 1)] += left;
        } else {
            scratch[0] += left;  // reflected
        }
        if (j + 1 < n) {
            scratch[static_cast<std::size_t>(j + 1)] += right;
        } else {
            scratch[static_cast<std::size_t>(n - 1)] += right;  // reflected
        }
    }
    book.swap(scratch);
}

}  // namespace

void SimConfig::validate() const {
    if (n_bins < 8) throw std::invalid_argument("n_bins must be at least 8");
    if (!(price_step > 0.0)) throw std::invalid_argument("price_step must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(p_diff_latent >= 0.0 && p_diff_latent <= 1.0) ||
        !(p_diff_revealed >= 0.0 && p_diff_revealed <= 1.0)) {
        throw std::invalid_argument("hop probabilities must lie in [0,1]");
    }
    if (!(omega_reveal >= 0.0) || !(omega_unreveal >= 0.0)) {
        throw std::invalid_argument("conversion rates must be nonnegative");
    }
    if (omega_reveal * tau > 1.0 || omega_unreveal * tau > 1.0) {
        throw std::invalid_argument("omega*tau must not exceed 1");
    }
    if (!(k > 0.0)) throw std::invalid_argument("k must be positive");
    if (!(L_latent >= 0.0)) throw std::invalid_argument("L_latent must be nonnegative");
    if (n_steps < 0 || burn_in < 0) throw std::invalid_argument("step counts must be nonnegative");
    if (volatility_window < 1) throw std::invalid_argument("volatility_window must be positive");
    if (profile_stride < 1) throw std::invalid_argument("profile_stride must be positive");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
}

double SimConfig::d_latent() const {
    return p_diff_latent * price_step * price_step / (2.0 * tau);
}

double SimConfig::d_revealed() const {
    return p_diff_revealed * price_step * price_step / (2.0 * tau);
}

double SimConfig::injection_per_step() const {
    return d_latent() * L_latent * tau;
}

ModelParams SimConfig::model() const {
    ModelParams p;
    p.D_latent = d_latent();
    p.D_revealed = d_revealed();
    p.omega_reveal = omega_reveal;
    p.omega_unreveal = omega_unreveal;
    p.k = k;
    p.L_latent = L_latent;
    return p;
}

long long SimState::total_particles() const {
    long long total = 0;
    for (long long c : latent_bid) total += c;
    for (long long c : latent_ask) total += c;
    for (long long c : revealed_bid) total += c;
    for (long long c : revealed_ask) total += c;
    return total;
}

namespace {

SimState blank_state(const SimConfig& cfg) {
    cfg.validate();
    SimState s;
    const std::size_t n = static_cast<std::size_t>(cfg.n_bins);
    s.latent_bid.assign(n, 0);
    s.latent_ask.assign(n, 0);
    s.revealed_bid.assign(n, 0);
    s.revealed_ask.assign(n, 0);
    s.rng.seed(cfg.seed);
    s.trade_price = cfg.domain_center();
    return s;
}

}  // namespace

SimState initial_state_from_profile(const SimConfig& cfg,
                                    const BookProfile& profile) {
    SimState s = blank_state(cfg);
    const double dx = cfg.price_step;
    const double center = cfg.domain_center();
    for (int j = 0; j < cfg.n_bins; ++j) {
        const double xi = cfg.bin_center(j) - center;
        const std::size_t u = static_cast<std::size_t>(j);
        s.latent_bid[u] = std::llround(profile.latent_bid_full(xi) * dx);
        s.latent_ask[u] = std::llround(profile.latent_ask_full(xi) * dx);
        const long long phi = std::llround(profile.phi_full(xi) * dx);
        s.revealed_bid[u] = std::max(phi, 0LL);
        s.revealed_ask[u] = std::max(-phi, 0LL);
    }
    const double p = trade_price(s, cfg);
    if (std::isfinite(p)) s.trade_price = p;
    return s;
}

SimState initial_state_ramp(const SimConfig& cfg) {
    SimState s = blank_state(cfg);
    const double dx = cfg.price_step;
    const double center = cfg.domain_center();
    for (int j = 0; j < cfg.n_bins; ++j) {
        const double xi = cfg.bin_center(j) - center;
        const std::size_t u = static_cast<std::size_t>(j);
        s.latent_bid[u] = std::llround(cfg.L_latent * std::max(-xi, 0.0) * dx);
        s.latent_ask[u] = std::llround(cfg.L_latent * std::max(xi, 0.0) * dx);
    }
    return s;
}

int best_bid_bin(const SimState& state) {
    for (int j = static_cast<int>(state.revealed_bid.size()) - 1; j >= 0; --j) {
        if (state.revealed_bid[static_cast<std::size_t>(j)] > 0) return j;
    }
    return -1;
}

int best_ask_bin(const SimState& state) {
    const int n = static_cast<int>(state.revealed_ask.size());
    for (int j = 0; j < n; ++j) {
        if (state.revealed_ask[static_cast<std::size_t>(j)] > 0) return j;
    }
    return -1;
}

double trade_price(const SimState& state, const SimConfig& cfg) {
    const int bb = best_bid_bin(state);
    const int ba = best_ask_bin(state);
    if (bb < 0 || ba < 0) return kNaN;
    return 0.5 * (cfg.bin_center(bb) + cfg.bin_center(ba));
}

double fair_price(const SimState& state, const SimConfig& cfg) {
    const int n = cfg.n_bins;
    long long total_bid = 0;
    for (int j = 0; j < n; ++j) {
        total_bid += state.latent_bid[static_cast<std::size_t>(j)] +
                     state.revealed_bid[static_cast<std::size_t>(j)];
    }
    long long total_ask = 0;
    for (int j = 0; j < n; ++j) {
        total_ask += state.latent_ask[static_cast<std::size_t>(j)] +
                     state.revealed_ask[static_cast<std::size_t>(j)];
    }
    if (total_bid == 0 || total_ask == 0) return kNaN;
    // G(j) = ask volume at or below bin j minus bid volume strictly above,
    // attached to the upper boundary of bin j; nondecreasing, so the sign
    // change is unique. G(-1) = -total_bid anchors the domain bottom.
    const auto boundary = [&](int j) {
        return static_cast<double>(j + 1) * cfg.price_step;
    };
    long long ask_below = 0;
    long long bid_above = total_bid;
    int last_neg = -1, first_pos = n;
    double g_neg = -static_cast<double>(total_bid), g_pos = 0.0;
    for (int j = 0; j < n; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        ask_below += state.latent_ask[u] + state.revealed_ask[u];
        bid_above -= state.latent_bid[u] + state.revealed_bid[u];
        const double g = static_cast<double>(ask_below) -
                         static_cast<double>(bid_above);
        if (g < 0.0) {
            last_neg = j;
            g_neg = g;
        } else if (g > 0.0 && first_pos == n) {
            first_pos = j;
            g_pos = g;
        }
    }
    if (first_pos == n) return boundary(n - 1);  // total_ask > 0 rules this out
    if (first_pos == last_neg + 1) {
        const double x0 = boundary(last_neg);
        const double x1 = boundary(first_pos);
        return x0 + (x1 - x0) * (-g_neg) / (g_pos - g_neg);
    }
    // flat stretch of exact balance: take its midpoint
    return 0.5 * (boundary(last_neg + 1) + boundary(first_pos - 1));
}

long long execute_market_buy(SimState& state, long long volume) {
    long long filled = 0;
    const int n = static_cast<int>(state.revealed_ask.size());
    for (int j = 0; j < n && volume > 0; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        const long long take = std::min(volume, state.revealed_ask[u]);
        state.revealed_ask[u] -= take;
        volume -= take;
        filled += take;
    }
    state.executed += filled;
    if (volume > 0) state.crisis = true;
    return filled;
}

long long execute_market_sell(SimState& state, long long volume) {
    long long filled = 0;
    for (int j = static_cast<int>(state.revealed_bid.size()) - 1;
         j >= 0 && volume > 0; --j) {
        const std::size_t u = static_cast<std::size_t>(j);
        const long long take = std::min(volume, state.revealed_bid[u]);
        state.revealed_bid[u] -= take;
        volume -= take;
        filled += take;
    }
    state.executed += filled;
    if (volume > 0) state.crisis = true;
    return filled;
}

void step(SimState& state, const SimConfig& cfg) {
    const int n = cfg.n_bins;
    const std::size_t un = static_cast<std::size_t>(n);
    if (state.latent_bid.size() != un) {
        throw std::invalid_argument("state does not match config");
    }
    std::vector<long long> scratch(un, 0);

    // 1. diffusion
    diffuse_book(state.latent_bid, cfg.p_diff_latent, state.rng, scratch);
    diffuse_book(state.latent_ask, cfg.p_diff_latent, state.rng, scratch);
    diffuse_book(state.revealed_bid, cfg.p_diff_revealed, state.rng, scratch);
    diffuse_book(state.revealed_ask, cfg.p_diff_revealed, state.rng, scratch);

    // 2. boundary injection sustaining the latent ramps
    const double inj = cfg.injection_per_step();
    state.inject_acc_bid += inj;
    state.inject_acc_ask += inj;
    const long long whole_bid = static_cast<long long>(state.inject_acc_bid);
    const long long whole_ask = static_cast<long long>(state.inject_acc_ask);
    state.inject_acc_bid -= static_cast<double>(whole_bid);
    state.inject_acc_ask -= static_cast<double>(whole_ask);
    state.latent_bid[0] += whole_bid;
    state.latent_ask[un - 1] += whole_ask;
    state.injected += whole_bid + whole_ask;

    // 3. conversions, simultaneous against the cycle-start books and the
    //    mid-price of the previous cycle
    const std::vector<long long> lb0 = state.latent_bid;
    const std::vector<long long> la0 = state.latent_ask;
    const std::vector<long long> rb0 = state.revealed_bid;
    const std::vector<long long> ra0 = state.revealed_ask;
    const int bb0 = best_bid_bin(state);
    const int ba0 = best_ask_bin(state);
    const double wr = cfg.omega_reveal * cfg.tau;
    const double wu = cfg.omega_unreveal * cfg.tau;
    for (int j = 0; j < n; ++j) {
        const std::size_t u = static_cast<std::size_t>(j);
        const double xi = cfg.bin_center(j) - state.trade_price;
        const double gamma_ask = gamma_profile(cfg.k * xi);
        const double gamma_bid = gamma_profile(-cfg.k * xi);

        long long reveal_ask = draw_binomial(state.rng, la0[u], wr * gamma_ask);
        if (reveal_ask > 0) {
            state.latent_ask[u] -= reveal_ask;
            int dest = j;
            if (cfg.wrong_side == WrongSideMode::to_best_quote && xi < 0.0 &&
                ba0 >= 0) {
                dest = ba0;  // a sell below the mid joins the best ask
            }
            state.revealed_ask[static_cast<std::size_t>(dest)] += reveal_ask;
            state.revealed_count += reveal_ask;
        }
        long long reveal_bid = draw_binomial(state.rng, lb0[u], wr * gamma_bid);
        if (reveal_bid > 0) {
            state.latent_bid[u] -= reveal_bid;
            int dest = j;
            if (cfg.wrong_side == WrongSideMode::to_best_quote && xi > 0.0 &&
                bb0 >= 0) {
                dest = bb0;
            }
            state.revealed_bid[static_cast<std::size_t>(dest)] += reveal_bid;
            state.revealed_count += reveal_bid;
        }
        long long unrev_ask =
            draw_binomial(state.rng, ra0[u], wu * (1.0 - gamma_ask));
        if (unrev_ask > 0) {
            state.revealed_ask[u] -= unrev_ask;
            state.latent_ask[u] += unrev_ask;
            state.unrevealed_count += unrev_ask;
        }
        long long unrev_bid =
            draw_binomial(state.rng, rb0[u], wu * (1.0 - gamma_bid));
        if (unrev_bid > 0) {
            state.revealed_bid[u] -= unrev_bid;
            state.latent_bid[u] += unrev_bid;
            state.unrevealed_count += unrev_bid;
        }
    }

    // 4. matching: same-bin pairs first, then clear crossed best quotes
    for (std::size_t u = 0; u < un; ++u) {
        const long long m = std::min(state.revealed_bid[u], state.revealed_ask[u]);
        if (m > 0) {
            state.revealed_bid[u] -= m;
            state.revealed_ask[u] -= m;
            state.matched_pairs += m;
        }
    }
    int bb = best_bid_bin(state);
    int ba = best_ask_bin(state);
    while (bb >= 0 && ba >= 0 && bb > ba) {
        const std::size_t ub = static_cast<std::size_t>(bb);
        const std::size_t ua = static_cast<std::size_t>(ba);
        const long long m = std::min(state.revealed_bid[ub], state.revealed_ask[ua]);
        state.revealed_bid[ub] -= m;
        state.revealed_ask[ua] -= m;
        state.matched_pairs += m;
        while (bb >= 0 && state.revealed_bid[static_cast<std::size_t>(bb)] == 0) --bb;
        while (ba < n && state.revealed_ask[static_cast<std::size_t>(ba)] == 0) ++ba;
        if (ba >= n) ba = -1;
    }

    // 5. price update and structural flags
    state.time += cfg.tau;
    const double p = trade_price(state, cfg);
    if (std::isfinite(p)) {
        state.trade_price = p;
        state.crisis = false;
        state.overflow = (best_bid_bin(state) <= 0 ||
                          best_ask_bin(state) >= n - 1);
    } else {
        state.crisis = true;
    }
}

std::vector<OhlcBar> ohlc_windows(const std::vector<double>& xs, int window) {
    std::vector<OhlcBar> bars;
    if (window < 1) return bars;
    const std::size_t w = static_cast<std::size_t>(window);
    for (std::size_t i0 = 0; i0 + w <= xs.size(); i0 += w) {
        OhlcBar bar{xs[i0], xs[i0], xs[i0], xs[i0 + w - 1]};
        for (std::size_t i = i0; i < i0 + w; ++i) {
            bar.high = std::max(bar.high, xs[i]);
            bar.low = std::min(bar.low, xs[i]);
        }
        bars.push_back(bar);
    }
    return bars;
}

VolatilityEstimate volatility_of(const std::vector<double>& xs, int window) {
    VolatilityEstimate est;
    const std::vector<OhlcBar> bars = ohlc_windows(xs, window);
    est.windows = static_cast<int>(bars.size());
    if (bars.empty()) return est;
    double rs = 0.0, pk = 0.0;
    for (const OhlcBar& b : bars) {
        rs += (b.high - b.open) * (b.high - b.close) +
              (b.low - b.open) * (b.low - b.close);
        pk += (b.high - b.low) * (b.high - b.low);
    }
    const double m = static_cast<double>(bars.size());
    est.rogers_satchell_sq = rs / m;
    est.parkinson_sq = pk / (4.0 * std::log(2.0) * m);
    return est;
}

VolatilityEstimate volatility(const PriceSeries& series) {
    return volatility_of(series.trade, series.window);
}

ProfileAccumulator::ProfileAccumulator(const SimConfig& cfg)
    : n_(cfg.n_bins), dx_(cfg.price_step), batch_size_(cfg.batch_size) {
    const std::size_t n = static_cast<std::size_t>(n_);
    cur_lb_.assign(n, 0.0);
    cur_la_.assign(n, 0.0);
    cur_phi_.assign(n, 0.0);
    sum_lb_.assign(n, 0.0);
    sum_la_.assign(n, 0.0);
    sum_phi_.assign(n, 0.0);
    sq_lb_.assign(n, 0.0);
    sq_la_.assign(n, 0.0);
    sq_phi_.assign(n, 0.0);
}

void ProfileAccumulator::add(const SimState& state) {
    // Shift into the mid-price frame. The mid usually falls between bin
    // boundaries, so each snapshot is split between the two straddling
    // integer shifts weighted by the fractional offset; rounding to one
    // frame instead would bias half-tick mids systematically to one side.
    const double f = state.trade_price / dx_ - static_cast<double>(n_ / 2);
    const long long lo = static_cast<long long>(std::floor(f));
    const double w_hi = f - static_cast<double>(lo);
    for (int i = 0; i < n_; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const long long j0 = static_cast<long long>(i) + lo;
        for (int part = 0; part < 2; ++part) {
            const double w = part == 0 ? 1.0 - w_hi : w_hi;
            const long long j = j0 + part;
            if (w == 0.0 || j < 0 || j >= n_) continue;
            const std::size_t uj = static_cast<std::size_t>(j);
            cur_lb_[ui] += w * static_cast<double>(state.latent_bid[uj]);
            cur_la_[ui] += w * static_cast<double>(state.latent_ask[uj]);
            cur_phi_[ui] += w * static_cast<double>(state.revealed_bid[uj] -
                                                    state.revealed_ask[uj]);
        }
    }
    ++snapshots_;
    if (++in_batch_ == batch_size_) close_batch();
}

void ProfileAccumulator::close_batch() {
    const double norm = 1.0 / (static_cast<double>(in_batch_) * dx_);
    for (std::size_t i = 0; i < cur_lb_.size(); ++i) {
        const double lb = cur_lb_[i] * norm;
        const double la = cur_la_[i] * norm;
        const double ph = cur_phi_[i] * norm;
        sum_lb_[i] += lb;
        sum_la_[i] += la;
        sum_phi_[i] += ph;
        sq_lb_[i] += lb * lb;
        sq_la_[i] += la * la;
        sq_phi_[i] += ph * ph;
        cur_lb_[i] = cur_la_[i] = cur_phi_[i] = 0.0;
    }
    in_batch_ = 0;
    ++batches_;
}

AveragedProfile ProfileAccumulator::finalize() const {
    AveragedProfile out;
    const std::size_t n = static_cast<std::size_t>(n_);
    out.xi.resize(n);
    out.latent_bid.resize(n);
    out.latent_ask.resize(n);
    out.phi.resize(n);
    out.latent_bid_err.assign(n, 0.0);
    out.latent_ask_err.assign(n, 0.0);
    out.phi_err.assign(n, 0.0);
    out.snapshots = snapshots_;
    out.batches = batches_;
    const double b = static_cast<double>(std::max(batches_, 1));
    auto fill = [&](const std::vector<double>& sum, const std::vector<double>& sq,
                    std::vector<double>& mean, std::vector<double>& err) {
        for (std::size_t i = 0; i < n; ++i) {
            const double m = sum[i] / b;
            mean[i] = m;
            if (batches_ > 1) {
                const double var =
                    std::max(0.0, (sq[i] / b - m * m) * b / (b - 1.0));
                err[i] = std::sqrt(var / b);
            }
        }
    };
    fill(sum_lb_, sq_lb_, out.latent_bid, out.latent_bid_err);
    fill(sum_la_, sq_la_, out.latent_ask, out.latent_ask_err);
    fill(sum_phi_, sq_phi_, out.phi, out.phi_err);
    for (int i = 0; i < n_; ++i) {
        out.xi[static_cast<std::size_t>(i)] = (i - n_ / 2 + 0.5) * dx_;
    }
    return out;
}

RunResult run_simulation(const SimConfig& cfg, SimState state) {
    cfg.validate();
    RunResult result;
    result.series.window = cfg.volatility_window;
    ProfileAccumulator acc(cfg);
    for (long long t = 0; t < cfg.burn_in; ++t) {
        step(state, cfg);
    }
    // a transient crisis during burn-in may heal; a standing one aborts here
    if (state.crisis || state.overflow) {
        result.crisis = state.crisis;
        result.overflow = state.overflow;
        result.final_state = std::move(state);
        return result;
    }
    for (long long t = 0; t < cfg.n_steps; ++t) {
        step(state, cfg);
        if (state.crisis || state.overflow) {
            result.crisis = state.crisis;
            result.overflow = state.overflow;
            break;
        }
        result.series.time.push_back(state.time);
        result.series.trade.push_back(state.trade_price);
        result.series.fair.push_back(fair_price(state, cfg));
        if (t % cfg.profile_stride == 0) acc.add(state);
        ++result.steps_run;
    }
    result.profile = acc.finalize();
    result.final_state = std::move(state);
    return result;
}

RunResult run_simulation(const SimConfig& cfg) {
    return run_simulation(cfg, initial_state_ramp(cfg));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace lrob
