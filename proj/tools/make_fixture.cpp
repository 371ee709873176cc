// Produces data/synthetic_snapshots.csv: order book snapshots drawn from a
// known stationary book, for calibration round-trip runs. The best quotes are
// pinned (the touch level is always present with its model size) so every
// snapshot folds onto the same offset grid: level j sits at offset
// (j + 0.5) * 0.01 percent from the opposite best quote, which is exactly the
// bin center the default ingest produces at a 0.01% bin width. Sizes carry 1%
// multiplicative gaussian noise from a fixed seed, so the fixture is
// reproducible byte for byte.
//
// Generator parameters (the values a calibration run should recover):
//   L_latent = 2500, k = 1.2, l_latent = 1.0, l_revealed = 0.35
// in percent-of-price units at an average price of 100.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "lrob/model.hpp"
#include "lrob/profile.hpp"
#include "lrob/stationary_bvp.hpp"

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::cerr << "usage: make_fixture <out.csv> [n_snapshots]\n";
        return 2;
    }
    const std::string out_path = argv[1];
    const int n_snapshots = argc == 3 ? std::atoi(argv[2]) : 12;
    if (n_snapshots < 1) {
        std::cerr << "n_snapshots must be >= 1\n";
        return 2;
    }

    lrob::ModelParams truth;
    truth.L_latent = 2500.0;
    truth.k = 1.2;
    truth.D_latent = 1.0;
    truth.D_revealed = 0.35 * 0.35;
    truth.omega_reveal = 1.0;
    truth.omega_unreveal = 1.0;
    const lrob::BvpSolution sol = lrob::solve_stationary(truth);

    const double mid = 100.0;
    const double width = 0.01;        // percent of price = absolute at 100
    const double half_spread = 0.0075; // touch offset 2*hs = first bin center
    const double best_bid = mid - half_spread;
    const double best_ask = mid + half_spread;
    // covers every default ingest bin except the sub-touch first one: a
    // ladder truncated inside the fit window would leave hard-zero bins
    // that contradict the model tail and drag the fit off the generator
    const int n_levels = 399;

    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot write " << out_path << '\n';
        return 2;
    }
    out << "timestamp,side,price,size\n";

    std::mt19937_64 rng(424242);
    std::normal_distribution<double> gauss(0.0, 1.0);
    char ts[16], row[96];
    for (int s = 0; s < n_snapshots; ++s) {
        std::snprintf(ts, sizeof ts, "t%04d", s + 1);
        for (int j = 1; j <= n_levels; ++j) {
            const double offset = (j + 0.5) * width;
            const double base = std::abs(sol.profile.phi_at(offset)) * width;
            const double ask_size = base * (1.0 + 0.01 * gauss(rng));
            const double bid_size = base * (1.0 + 0.01 * gauss(rng));
            if (ask_size > 0.0) {
                std::snprintf(row, sizeof row, "%s,A,%.6f,%.10g\n", ts,
                              best_bid + offset, ask_size);
                out << row;
            }
            if (bid_size > 0.0) {
                std::snprintf(row, sizeof row, "%s,B,%.6f,%.10g\n", ts,
                              best_ask - offset, bid_size);
                out << row;
            }
        }
    }
    std::cout << "wrote " << out_path << " (" << n_snapshots
              << " snapshots, touch at " << best_ask << "/" << best_bid
              << ")\n";
    return 0;
}
