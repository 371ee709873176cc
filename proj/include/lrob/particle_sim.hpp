#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lrob/model.hpp"
#include "lrob/profile.hpp"

namespace lrob {

// Where a newly revealed order lands when it would sit on the wrong side of
// the price (a sell below the mid or a buy above it).
enum class WrongSideMode { in_place, to_best_quote };

struct SimConfig {
    int n_bins = 2000;
    double price_step = 1.0;
    double tau = 1.0;
    // per-step hop probabilities; D = p * price_step^2 / (2 tau)
    double p_diff_latent = 0.5;
    double p_diff_revealed = 0.5;
    double omega_reveal = 1e-3;
    double omega_unreveal = 1e-3;
    double k = 0.05;
    double L_latent = 1.0;
    std::uint64_t seed = 0;
    WrongSideMode wrong_side = WrongSideMode::in_place;
    long long n_steps = 0;
    long long burn_in = 0;
    int volatility_window = 100;
    // averaged-profile sampling: one snapshot every profile_stride steps,
    // grouped into batches of batch_size snapshots for the error bars
    int profile_stride = 16;
    int batch_size = 64;

    void validate() const;
    double d_latent() const;
    double d_revealed() const;
    double injection_per_step() const;  // D_latent * L_latent * tau
    double bin_center(int j) const { return (j + 0.5) * price_step; }
    double domain_center() const { return 0.5 * n_bins * price_step; }
    ModelParams model() const;
};

struct SimState {
    std::vector<long long> latent_bid, latent_ask, revealed_bid, revealed_ask;
    double time = 0.0;
    double trade_price = 0.0;
    std::mt19937_64 rng;
    double inject_acc_bid = 0.0, inject_acc_ask = 0.0;
    bool crisis = false;    // a revealed side emptied: trade price undefined
    bool overflow = false;  // book structure reached the domain edge
    // cumulative bookkeeping
    long long injected = 0;
    long long matched_pairs = 0;
    long long revealed_count = 0;
    long long unrevealed_count = 0;
    long long executed = 0;

    long long total_particles() const;
};

// Initial books from a stationary profile (densities rounded to whole
// particles, mid sitting at the domain center).
SimState initial_state_from_profile(const SimConfig& cfg,
                                    const BookProfile& profile);
// Latent ramps L*|xi| with empty revealed books.
SimState initial_state_ramp(const SimConfig& cfg);

// One full cycle: diffusion, boundary injection, conversion against the
// current mid, same-bin matching plus crossed-quote clearing, price update.
void step(SimState& state, const SimConfig& cfg);

int best_bid_bin(const SimState& state);  // -1 when the side is empty
int best_ask_bin(const SimState& state);

// Midpoint of the best revealed bid and ask bin centers; NaN on an empty side.
double trade_price(const SimState& state, const SimConfig& cfg);

// Root of cumulative ask volume at-or-below minus cumulative bid volume
// strictly above (latent plus revealed), linearly interpolated between bin
// centers; NaN when a side carries no volume.
double fair_price(const SimState& state, const SimConfig& cfg);

// Market orders walking the opposite book from the touch; returns the volume
// actually filled and flags a crisis when the book runs dry first.
long long execute_market_buy(SimState& state, long long volume);
long long execute_market_sell(SimState& state, long long volume);

struct OhlcBar {
    double open, high, low, close;
};

struct PriceSeries {
    std::vector<double> time, trade, fair;
    int window = 100;
};

std::vector<OhlcBar> ohlc_windows(const std::vector<double>& xs, int window);

struct VolatilityEstimate {
    double rogers_satchell_sq = 0.0;  // mean[(H-O)(H-C)+(L-O)(L-C)]
    double parkinson_sq = 0.0;        // mean[(H-L)^2] / (4 ln 2)
    int windows = 0;
};

VolatilityEstimate volatility_of(const std::vector<double>& xs, int window);
VolatilityEstimate volatility(const PriceSeries& series);

// Time-averaged densities in the mid-price frame (xi = bin center - mid),
// with batch-means standard errors per bin.
struct AveragedProfile {
    std::vector<double> xi;
    std::vector<double> latent_bid, latent_ask, phi;
    std::vector<double> latent_bid_err, latent_ask_err, phi_err;
    long long snapshots = 0;
    int batches = 0;
};

class ProfileAccumulator {
public:
    explicit ProfileAccumulator(const SimConfig& cfg);
    void add(const SimState& state);
    AveragedProfile finalize() const;

private:
    void close_batch();

    int n_ = 0;
    double dx_ = 1.0;
    int batch_size_ = 64;
    int in_batch_ = 0;
    std::vector<double> cur_lb_, cur_la_, cur_phi_;
    std::vector<double> sum_lb_, sum_la_, sum_phi_;
    std::vector<double> sq_lb_, sq_la_, sq_phi_;
    long long snapshots_ = 0;
    int batches_ = 0;
};

struct RunResult {
    PriceSeries series;
    AveragedProfile profile;
    SimState final_state;
    bool crisis = false;
    bool overflow = false;
    long long steps_run = 0;
};

// Burn-in without recording, then n_steps recording prices every step and
// profile snapshots every profile_stride steps. Stops early on crisis or
// domain overflow, returning the partial series.
RunResult run_simulation(const SimConfig& cfg, SimState state);
RunResult run_simulation(const SimConfig& cfg);

// Independent per-member stream seed (splitmix64 mix of master and index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace lrob
