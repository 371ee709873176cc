#pragma once

#include <string>
#include <vector>

#include "lrob/stationary_bvp.hpp"

namespace lrob {

// One cell of the (k*ell_latent, k*ell_revealed) stability sweep. All
// diagnostics come from a nondimensional stationary solve (L = k = omega = 1)
// and are therefore already the rescaled quantities: slope0 = phi'(0+) k / L,
// overlap0 = rho_latent(0) k / L, vol_revealed = V_r k^2 / L.
struct StabilityCell {
    double k_ll = 0.0;
    double k_lr = 0.0;
    double slope0 = 0.0;
    double overlap0 = 0.0;
    double vol_revealed = 0.0;
    bool stable = false;   // slope0 < 0
    bool solver_ok = true; // false: solve failed, diagnostics are zero
};

struct SweepConfig {
    int n_ll = 60;
    int n_lr = 60;
    double coord_min = 0.02;
    double coord_max = 3.0;
    int workers = 1;
    BvpConfig bvp{.n_points = 1201};

    void validate() const; // throws std::invalid_argument
};

std::vector<double> log_spaced(double lo, double hi, int n);

// Stationary solve at L = k = omega = 1 with ell_latent = k_ll and
// ell_revealed = k_lr. Solver failures are captured in the cell.
StabilityCell evaluate_cell(double k_ll, double k_lr, const BvpConfig& bvp);

// Row-major sweep (k_ll fastest) over the log-spaced grid. Cell order is
// deterministic regardless of how many workers run the solves.
std::vector<StabilityCell> sweep(const SweepConfig& cfg = {});

// Critical value of zeta = k*ell_latent where phi'(0+) changes sign, at
// fixed ratio ell_revealed / ell_latent. Bisection on [0.5, 3].
double critical_zeta_numeric(double ratio, double tol_zeta = 1e-3,
                             const BvpConfig& bvp = BvpConfig{.n_points = 1201});

struct CriticalPoint {
    double ratio = 0.0;  // ell_revealed / ell_latent
    double zeta_c = 0.0; // critical k*ell_latent
    double k_lr = 0.0;   // ratio * zeta_c, the same point versus k*ell_revealed
};

struct CriticalLine {
    std::vector<CriticalPoint> points; // ascending ratio

    // Linear interpolation in ratio, clamped to the tabulated range.
    double zeta_at(double ratio) const;
};

// Trace zeta_c over the given ratios; ratios whose bracket shows no sign
// change are skipped. Throws if every ratio fails.
CriticalLine critical_line(const std::vector<double>& ratios,
                           double tol_zeta = 1e-3,
                           const BvpConfig& bvp = BvpConfig{.n_points = 1201});

// Default ratio set for the critical line: log-spaced on [0.01, 1].
std::vector<double> default_ratio_grid(int n = 25);

struct AssetLocation {
    double k_ll = 0.0;
    double k_lr = 0.0;
    double ratio = 0.0;
    double zeta_c = 0.0;
    double margin = 0.0; // zeta_c - k_ll, positive means stable
    bool stable = false;
};

// Place a parameter point on the map relative to the critical line.
AssetLocation locate_asset(double k, double l_latent, double l_revealed,
                           const CriticalLine& line);

// CSV fields: k_ll,k_lr,slope0,overlap0,vol_revealed,stable,solver_ok
void write_sweep_csv(const std::vector<StabilityCell>& cells,
                     const std::string& path);
// CSV fields: ratio,zeta_c,k_lr
void write_critical_csv(const CriticalLine& line, const std::string& path);

} // namespace lrob
