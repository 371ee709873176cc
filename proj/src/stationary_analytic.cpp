#include "lrob/stationary_analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace lrob {

namespace {

// (expm1(x) - x) / x^2, stable through x = 0.
double expm1_quad(double x) {
    if (std::abs(x) < 1e-3) {
        return 0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0));
    }
    return (std::expm1(x) - x) / (x * x);
}

double cubic_root_equal_lengths() {
    const double s = 6.0 * std::sqrt(87.0);
    return (-2.0 + std::cbrt(73.0 - s) + std::cbrt(73.0 + s)) / 3.0;
}

} // namespace

double phi_revealed_zero_dr(const ModelParams& p, double xi) {
    const double ratio = p.omega_reveal / p.omega_unreveal;
    const double ell = std::sqrt(p.D_latent / p.omega_reveal);
    if (xi == 0.0) return ratio * p.L_latent * (0.5 * ell - 1.0 / p.k);
    const double rb = 0.5 * p.L_latent * ell * std::exp(-xi / ell);
    return ratio * (rb - p.L_latent * xi / std::expm1(p.k * xi));
}

double jump_at_origin(const ModelParams& p) {
    p.validate();
    if (p.D_revealed != 0.0) {
        throw std::invalid_argument("jump exists only for D_revealed = 0");
    }
    const double ratio = p.omega_reveal / p.omega_unreveal;
    const double ell = std::sqrt(p.D_latent / p.omega_reveal);
    return -ratio * p.L_latent * (ell - 2.0 / p.k);
}

BookProfile stationary_zero_dr(const ModelParams& p,
                               const std::vector<double>& grid) {
    p.validate();
    if (p.D_revealed != 0.0) {
        throw std::invalid_argument("closed form requires D_revealed = 0");
    }
    const double ell = std::sqrt(p.D_latent / p.omega_reveal);
    BookProfile b;
    b.params = p;
    b.provenance = ProfileProvenance::analytic_dr0;
    b.grid = grid;
    const std::size_t n = grid.size();
    b.rho_latent_bid.resize(n);
    b.rho_latent_ask.resize(n);
    b.phi_revealed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = grid[i];
        const double rb = 0.5 * p.L_latent * ell * std::exp(-xi / ell);
        b.rho_latent_bid[i] = rb;
        b.rho_latent_ask[i] = p.L_latent * xi + rb;
        b.phi_revealed[i] = phi_revealed_zero_dr(p, xi);
    }
    b.validate();
    return b;
}

namespace detail {

double phi_tilde_equal_d_raw(double u, double zeta) {
    const double g = g_factor(zeta);
    const double alpha = 1.0 / (zeta * zeta - 1.0);
    const double gamma_t = g / (zeta * (zeta + 2.0));
    const double eta_t = g / (2.0 * zeta);
    const double a2z2 = 2.0 * alpha * alpha * zeta * zeta;
    return alpha * (u + alpha * 2.0 * zeta * zeta) * std::exp(-u) +
           gamma_t * std::exp(-u * (1.0 + 1.0 / zeta)) +
           (eta_t * u - a2z2 - gamma_t) * std::exp(-u / zeta);
}

double phi_tilde_equal_d_stable(double u, double zeta) {
    const double g = g_factor(zeta);
    const double gamma_t = g / (zeta * (zeta + 2.0));
    const double eta_t = g / (2.0 * zeta);
    const double eps = zeta - 1.0;
    const double delta = u * eps / zeta;
    const double two_eps = 2.0 + eps;
    const double F = -std::exp(-u) * (u + 2.0 * u * u * expm1_quad(delta)) /
                     (two_eps * two_eps);
    return F + gamma_t * std::exp(-u * (1.0 + 1.0 / zeta)) +
           (eta_t * u - gamma_t) * std::exp(-u / zeta);
}

} // namespace detail

double phi_tilde_equal_d(double u, double zeta) {
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be > 0");
    if (u < 0.0) throw std::invalid_argument("u must be >= 0");
    if (std::abs(zeta - 1.0) < 1e-4) {
        return detail::phi_tilde_equal_d_stable(u, zeta);
    }
    return detail::phi_tilde_equal_d_raw(u, zeta);
}

double phi_tilde_slope0(double zeta) {
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be > 0");
    const double zp1 = 1.0 + zeta;
    return (zeta * zeta * zeta + 2.0 * zeta * zeta - 3.0 * zeta - 8.0) /
           (zp1 * zp1 * (8.0 + 3.0 * zeta));
}

double phi_revealed_equal_d(const ModelParams& p, double xi) {
    return p.L_latent / p.k * phi_tilde_equal_d(p.k * xi, p.zeta_latent());
}

BookProfile stationary_equal_d(const ModelParams& p,
                               const std::vector<double>& grid) {
    p.validate();
    if (!p.equal_rates()) {
        throw std::invalid_argument("closed form requires equal rates");
    }
    if (p.D_revealed != p.D_latent) {
        throw std::invalid_argument("closed form requires D_revealed = D_latent");
    }
    const double zeta = p.zeta_latent();
    const double ell = p.ell_latent();
    const double g = g_factor(zeta);
    BookProfile b;
    b.params = p;
    b.provenance = ProfileProvenance::analytic_dreq;
    b.grid = grid;
    const std::size_t n = grid.size();
    b.rho_latent_bid.resize(n);
    b.rho_latent_ask.resize(n);
    b.phi_revealed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = grid[i];
        const double rb = p.L_latent / p.k * g * std::exp(-xi / ell);
        const double phi = phi_revealed_equal_d(p, xi);
        b.rho_latent_bid[i] = rb;
        b.rho_latent_ask[i] = p.L_latent * xi + rb + phi;
        b.phi_revealed[i] = phi;
    }
    b.validate();
    return b;
}

double critical_zeta(double ratio) {
    if (ratio < 0.0) throw std::invalid_argument("ratio must be >= 0");
    if (ratio <= 1e-12) return 2.0;
    if (std::abs(ratio - 1.0) <= 1e-12) return cubic_root_equal_lengths();
    throw std::invalid_argument(
        "closed-form threshold known only for ratio 0 or 1");
}

AmplitudeEstimate max_amplitude(const ModelParams& p) {
    p.validate();
    if (!p.equal_rates()) {
        throw std::invalid_argument("amplitude estimate requires equal rates");
    }
    const bool zero_dr = p.D_revealed == 0.0;
    if (!zero_dr && p.D_revealed != p.D_latent) {
        throw std::invalid_argument(
            "amplitude known only for D_revealed = 0 or = D_latent");
    }
    const double zeta = p.zeta_latent();
    const double zc = critical_zeta(zero_dr ? 0.0 : 1.0);
    if (zeta > zc) {
        throw std::domain_error("unstable book: k * ell_latent beyond threshold");
    }
    AmplitudeEstimate est;
    if (zero_dr) {
        est.estimate = p.L_latent / p.k * (1.0 - 0.5 * zeta);
        est.grid_max = std::abs(phi_revealed_zero_dr(p, 0.0));
        est.xi_peak = 0.0;
        for (double xi : default_grid(p)) {
            const double a = std::abs(phi_revealed_zero_dr(p, xi));
            if (a > est.grid_max) {
                est.grid_max = a;
                est.xi_peak = xi;
            }
        }
        return est;
    }
    const double pref = zc * (3.0 * zc * zc + 4.0 * zc - 3.0) /
                        ((1.0 + zc) * (1.0 + zc) * (8.0 + 3.0 * zc));
    est.estimate =
        p.L_latent / (std::exp(1.0) * p.k) * pref * (1.0 - zeta / zc);
    est.grid_max = 0.0;
    est.xi_peak = 0.0;
    for (double xi : default_grid(p)) {
        const double a = std::abs(phi_revealed_equal_d(p, xi));
        if (a > est.grid_max) {
            est.grid_max = a;
            est.xi_peak = xi;
        }
    }
    return est;
}

} // namespace lrob
