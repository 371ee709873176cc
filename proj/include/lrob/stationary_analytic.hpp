#pragma once

#include <vector>

#include "lrob/model.hpp"
#include "lrob/profile.hpp"

namespace lrob {

// Closed-form stationary book for D_revealed = 0. Valid for any
// omega_reveal/omega_unreveal ratio; the revealed imbalance acquires a
// prefactor omega_reveal/omega_unreveal and the decay length is set by
// sqrt(D_latent / omega_reveal).
BookProfile stationary_zero_dr(const ModelParams& p,
                               const std::vector<double>& grid);

// Closed-form stationary book for D_revealed = D_latent (equal rates only).
BookProfile stationary_equal_d(const ModelParams& p,
                               const std::vector<double>& grid);

// Pointwise evaluators for the same two solutions, xi > 0.
double phi_revealed_zero_dr(const ModelParams& p, double xi);
double phi_revealed_equal_d(const ModelParams& p, double xi);

// Discontinuity phi(0-) - phi(0+) of the D_revealed = 0 solution.
double jump_at_origin(const ModelParams& p);

// Dimensionless revealed imbalance for D_r = D_l: phi = (L/k) * phi_tilde(k xi)
// with zeta = k * ell_latent. Continuous through zeta = 1.
double phi_tilde_equal_d(double u, double zeta);

// d(phi_tilde)/du at u = 0+; the dimensional slope is L * phi_tilde_slope0.
double phi_tilde_slope0(double zeta);

// Largest k * ell_latent with a non-negative revealed ask density, as a
// function of ratio = ell_revealed / ell_latent. Only the closed-form
// endpoints are known: ratio 0 gives 2, ratio 1 gives the real root of
// z^3 + 2 z^2 - 3 z - 8 = 0.
double critical_zeta(double ratio);

// Peak revealed-book amplitude. For D_revealed = 0 the closed form
// (L/k)(1 - k l/2) is exact; for D_revealed = D_latent the value is the
// near-threshold scaling estimate, reported next to the scanned maximum of
// |phi| on the default grid. Throws std::domain_error past the stability
// threshold.
struct AmplitudeEstimate {
    double estimate = 0.0;
    double grid_max = 0.0;
    double xi_peak = 0.0;
};
AmplitudeEstimate max_amplitude(const ModelParams& p);

namespace detail {
double phi_tilde_equal_d_raw(double u, double zeta);
double phi_tilde_equal_d_stable(double u, double zeta);
} // namespace detail

} // namespace lrob
