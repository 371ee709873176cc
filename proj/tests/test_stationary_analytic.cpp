#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "lrob/model.hpp"
#include "lrob/profile.hpp"
#include "lrob/stationary_analytic.hpp"

using namespace lrob;

namespace {

ModelParams zero_dr_params(double k_ell, double k = 1.0, double L = 1.0) {
    ModelParams p;
    p.k = k;
    p.L_latent = L;
    p.omega_reveal = 1.0;
    p.omega_unreveal = 1.0;
    const double ell = k_ell / k;
    p.D_latent = ell * ell;
    p.D_revealed = 0.0;
    return p;
}

ModelParams equal_d_params(double k_ell, double k = 1.0, double L = 1.0) {
    ModelParams p = zero_dr_params(k_ell, k, L);
    p.D_revealed = p.D_latent;
    return p;
}

} // namespace

TEST_CASE("zero-diffusivity book: pointwise closed form") {
    const ModelParams p = zero_dr_params(1.0); // ell = 1, k = 1, L = 1
    const auto grid = clustered_grid(20.0, 801, 6.0);
    const BookProfile b = stationary_zero_dr(p, grid);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double xi = b.grid[i];
        CHECK(b.rho_latent_bid[i] ==
              doctest::Approx(0.5 * std::exp(-xi)).epsilon(1e-14));
        CHECK(b.rho_latent_ask[i] - b.rho_latent_bid[i] ==
              doctest::Approx(xi).epsilon(1e-13));
    }
    // ask-side revealed gap at the price
    CHECK(phi_revealed_zero_dr(p, 0.0) ==
          doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(jump_at_origin(p) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(jump_at_origin(p) ==
          doctest::Approx(-2.0 * phi_revealed_zero_dr(p, 0.0)).epsilon(1e-14));
}

TEST_CASE("zero-diffusivity book: overlap and gap limits") {
    const ModelParams p = zero_dr_params(0.35);
    const auto grid = clustered_grid(60.0, 401, 6.0);
    const BookProfile b = stationary_zero_dr(p, grid);
    CHECK(b.latent_bid_at(grid.front()) ==
          doctest::Approx(0.5 * 0.35).epsilon(0.01));
    CHECK(phi_revealed_zero_dr(p, 0.0) ==
          doctest::Approx(0.5 * 0.35 - 1.0).epsilon(1e-15));
    // jump vanishes exactly at k*ell = 2
    CHECK(jump_at_origin(zero_dr_params(2.0)) ==
          doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("zero-diffusivity book with distinct conversion rates") {
    ModelParams slow = zero_dr_params(1.0);
    slow.omega_unreveal = 2.0; // unreveal twice as fast
    const ModelParams base = zero_dr_params(1.0);
    for (double xi : {0.0, 0.05, 0.3, 1.0, 4.0}) {
        CHECK(phi_revealed_zero_dr(slow, xi) ==
              doctest::Approx(0.5 * phi_revealed_zero_dr(base, xi))
                  .epsilon(1e-14));
    }
    // latent densities do not depend on the unreveal rate
    const auto grid = clustered_grid(20.0, 101, 6.0);
    const BookProfile a = stationary_zero_dr(slow, grid);
    const BookProfile b = stationary_zero_dr(base, grid);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.rho_latent_bid[i] == b.rho_latent_bid[i]);
        CHECK(a.rho_latent_ask[i] == b.rho_latent_ask[i]);
    }
    // decay length follows the reveal rate
    ModelParams fast = zero_dr_params(1.0);
    fast.omega_reveal = 4.0;
    fast.omega_unreveal = 1.0;
    CHECK(fast.ell_latent() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("zero-diffusivity positivity: holds iff k*ell <= 1") {
    // k*ell below 1: revealed gap stays nonpositive everywhere
    {
        const ModelParams p = zero_dr_params(0.9);
        const BookProfile b = stationary_zero_dr(p, default_grid(p));
        const double mx =
            *std::max_element(b.phi_revealed.begin(), b.phi_revealed.end());
        CHECK(mx <= 1e-15);
    }
    // between 1 and 2: still negative at the price but a far hole opens
    {
        const ModelParams p = zero_dr_params(1.5);
        const BookProfile b = stationary_zero_dr(p, default_grid(p));
        CHECK(phi_revealed_zero_dr(p, 0.0) < 0.0);
        const double mx =
            *std::max_element(b.phi_revealed.begin(), b.phi_revealed.end());
        CHECK(mx > 1e-8);
    }
    // latent books are nonnegative in both regimes
    for (double kl : {0.9, 1.5}) {
        const ModelParams p = zero_dr_params(kl);
        const BookProfile b = stationary_zero_dr(p, default_grid(p));
        for (std::size_t i = 0; i < b.size(); ++i) {
            CHECK(b.rho_latent_bid[i] >= 0.0);
            CHECK(b.rho_latent_ask[i] >= 0.0);
        }
    }
}

TEST_CASE("equal-diffusivity book: frozen reference values") {
    CHECK(phi_tilde_equal_d(1.0, 0.35) ==
          doctest::Approx(-0.31734844581645129538).epsilon(1e-14));
    CHECK(phi_tilde_equal_d(1.0, 1.0) ==
          doctest::Approx(-0.14040222006449381725).epsilon(1e-13));
    for (double zeta : {0.35, 1.0, 1.8}) {
        CHECK(std::abs(phi_tilde_equal_d(0.0, zeta)) < 1e-12);
    }
}

TEST_CASE("equal-diffusivity book: profile structure") {
    const ModelParams p = equal_d_params(0.35);
    const auto grid = default_grid(p, 1201);
    const BookProfile b = stationary_equal_d(p, grid);
    const double g = g_factor(0.35);
    // overlap at the price
    CHECK(b.rho_latent_bid.front() ==
          doctest::Approx(g * std::exp(-grid.front() / 0.35)).epsilon(1e-12));
    // ask = ramp + bid + revealed gap, by construction; spot check a few nodes
    for (std::size_t i : {std::size_t{0}, b.size() / 2, b.size() - 1}) {
        CHECK(b.rho_latent_ask[i] ==
              doctest::Approx(b.grid[i] + b.rho_latent_bid[i] +
                              b.phi_revealed[i])
                  .epsilon(1e-12));
    }
    // revealed gap continuous at the price
    CHECK(std::abs(b.phi_revealed.front()) < 1e-3);
    CHECK(std::abs(phi_tilde_equal_d(grid.front(), 0.35)) <
          2.0 * grid.front());
}

TEST_CASE("degenerate-branch agreement at the switch") {
    for (double zeta : {1.0 + 1e-4, 1.0 - 1e-4}) {
        for (double u : {0.05, 0.3, 1.0, 2.5, 6.0}) {
            const double raw = detail::phi_tilde_equal_d_raw(u, zeta);
            const double stable = detail::phi_tilde_equal_d_stable(u, zeta);
            CHECK(raw == doctest::Approx(stable).epsilon(1e-6));
        }
    }
    // the stable branch is smooth through zeta = 1 exactly
    const double lo = detail::phi_tilde_equal_d_stable(1.0, 1.0 - 1e-9);
    const double at = detail::phi_tilde_equal_d_stable(1.0, 1.0);
    const double hi = detail::phi_tilde_equal_d_stable(1.0, 1.0 + 1e-9);
    CHECK(lo == doctest::Approx(at).epsilon(1e-7));
    CHECK(hi == doctest::Approx(at).epsilon(1e-7));
}

TEST_CASE("slope of the revealed gap at the price") {
    CHECK(phi_tilde_slope0(0.35) ==
          doctest::Approx(-0.53124313181608).epsilon(1e-12));
    CHECK(phi_tilde_slope0(1.0) ==
          doctest::Approx(-2.0 / 11.0).epsilon(1e-15));
    CHECK(phi_tilde_slope0(1.8) ==
          doctest::Approx(-0.0103563813585136).epsilon(1e-10));
    CHECK(phi_tilde_slope0(2.5) ==
          doctest::Approx(0.0664911125740619).epsilon(1e-10));
    // vanishes at the threshold
    CHECK(std::abs(phi_tilde_slope0(critical_zeta(1.0))) < 1e-15);
    // finite-difference consistency of the analytic slope
    const double h = 1e-6;
    const double fd = phi_tilde_equal_d(h, 0.35) / h;
    CHECK(fd == doctest::Approx(phi_tilde_slope0(0.35)).epsilon(1e-4));
}

TEST_CASE("critical thresholds") {
    CHECK(critical_zeta(0.0) == 2.0);
    CHECK(critical_zeta(1.0) ==
          doctest::Approx(1.8751297941627788).epsilon(1e-15));
    // the closed form is the root of z^3 + 2z^2 - 3z - 8
    const double z = critical_zeta(1.0);
    CHECK(std::abs(z * z * z + 2.0 * z * z - 3.0 * z - 8.0) < 1e-12);
    CHECK_THROWS_AS(critical_zeta(0.5), std::invalid_argument);
    CHECK_THROWS_AS(critical_zeta(-1.0), std::invalid_argument);
}

TEST_CASE("llob limit of the total ask density") {
    const double k_ell = 0.02;
    const ModelParams p = equal_d_params(k_ell);
    const double g = g_factor(k_ell);
    for (double u = 0.1; u <= 3.0; u += 0.1) {
        const double xi = u / p.k;
        const double phi = phi_revealed_equal_d(p, xi);
        const double bid = p.L_latent / p.k * g * std::exp(-xi / p.ell_latent());
        const double ask = p.L_latent * xi + bid + phi;
        const double revealed_ask = std::max(-phi, 0.0);
        const double total = p.k * (ask + revealed_ask) / p.L_latent;
        CHECK(total == doctest::Approx(u).epsilon(0.02));
    }
}

TEST_CASE("far-field behavior") {
    for (bool equal : {false, true}) {
        const ModelParams p =
            equal ? equal_d_params(0.7) : zero_dr_params(0.7);
        const double xi_max = 20.0 * std::max(1.0 / p.k, p.ell_latent());
        const BookProfile b =
            equal ? stationary_equal_d(p, clustered_grid(xi_max, 2001, 6.0))
                  : stationary_zero_dr(p, clustered_grid(xi_max, 2001, 6.0));
        const std::size_t n = b.size();
        CHECK(b.rho_latent_bid[n - 1] <= 1e-6 * p.L_latent / p.k);
        const double slope = (b.rho_latent_ask[n - 1] - b.rho_latent_ask[n - 2]) /
                             (b.grid[n - 1] - b.grid[n - 2]);
        CHECK(slope == doctest::Approx(p.L_latent).epsilon(1e-6));
    }
}

TEST_CASE("closed forms satisfy the stationary balance equations") {
    // centered-difference residuals shrink at second order when h halves
    auto max_residual = [](const ModelParams& p, double h) {
        const bool equal = p.D_revealed > 0.0;
        double worst = 0.0;
        for (double xi = 0.5; xi <= 6.0; xi += h) {
            auto bid = [&](double x) {
                return equal ? p.L_latent / p.k * g_factor(p.zeta_latent()) *
                                   std::exp(-x / p.ell_latent())
                             : 0.5 * p.L_latent * p.ell_latent() *
                                   std::exp(-x / p.ell_latent());
            };
            auto phi = [&](double x) {
                return equal ? phi_revealed_equal_d(p, x)
                             : phi_revealed_zero_dr(p, x);
            };
            auto ask = [&](double x) {
                return equal ? p.L_latent * x + bid(x) + phi(x)
                             : p.L_latent * x + bid(x);
            };
            const double gam = gamma_profile(p.k * xi);
            const double w = p.omega_reveal;
            const double d2b =
                (bid(xi - h) - 2.0 * bid(xi) + bid(xi + h)) / (h * h);
            const double d2a =
                (ask(xi - h) - 2.0 * ask(xi) + ask(xi + h)) / (h * h);
            const double rb = p.D_latent * d2b - w * bid(xi);
            const double ra =
                p.D_latent * d2a - w * (gam * ask(xi) + (1.0 - gam) * phi(xi));
            worst = std::max({worst, std::abs(rb), std::abs(ra)});
            if (equal) {
                const double d2f =
                    (phi(xi - h) - 2.0 * phi(xi) + phi(xi + h)) / (h * h);
                const double rf =
                    p.D_revealed * d2f -
                    w * (gam * ask(xi) + (1.0 - gam) * phi(xi) - bid(xi));
                worst = std::max(worst, std::abs(rf));
            } else {
                // algebraic revealed balance is exact
                const double rf =
                    gam * ask(xi) + (1.0 - gam) * phi(xi) - bid(xi);
                CHECK(std::abs(rf) < 1e-12);
            }
        }
        return worst;
    };
    for (bool equal : {false, true}) {
        const ModelParams p = equal ? equal_d_params(0.8) : zero_dr_params(0.8);
        const double r1 = max_residual(p, 0.02);
        const double r2 = max_residual(p, 0.01);
        CHECK(r1 / r2 >= 3.5);
    }
}

TEST_CASE("full-line reconstruction symmetry") {
    const ModelParams p = equal_d_params(0.6);
    const BookProfile b = stationary_equal_d(p, default_grid(p, 501));
    for (double xi : {0.13, 0.77, 2.9}) {
        CHECK(b.phi_full(-xi) == -b.phi_full(xi));
        CHECK(b.latent_bid_full(-xi) == b.latent_ask_full(xi));
        CHECK(b.latent_ask_full(-xi) == b.latent_bid_full(xi));
    }
}

TEST_CASE("profile csv round trip") {
    const ModelParams p = equal_d_params(0.42);
    const BookProfile b = stationary_equal_d(p, default_grid(p, 301));
    const std::string path = "profile_roundtrip_test.csv";
    write_profile_csv(b, path);
    const BookProfile r = read_profile_csv(path, p, b.provenance);
    REQUIRE(r.size() == b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(r.grid[i] == doctest::Approx(b.grid[i]).epsilon(1e-11));
        CHECK(r.phi_revealed[i] ==
              doctest::Approx(b.phi_revealed[i]).epsilon(1e-11));
    }
    std::remove(path.c_str());
}

TEST_CASE("amplitude of the revealed book") {
    // zero revealed diffusivity: exact closed form
    {
        const ModelParams p = zero_dr_params(1e-3);
        const AmplitudeEstimate est = max_amplitude(p);
        CHECK(est.estimate == doctest::Approx(1.0 - 5e-4).epsilon(1e-12));
        CHECK(est.grid_max == doctest::Approx(est.estimate).epsilon(1e-6));
    }
    {
        const AmplitudeEstimate est = max_amplitude(zero_dr_params(2.0));
        CHECK(est.estimate == doctest::Approx(0.0).epsilon(1e-15));
    }
    CHECK_THROWS_AS(max_amplitude(zero_dr_params(2.5)), std::domain_error);
    CHECK_THROWS_AS(max_amplitude(equal_d_params(2.0)), std::domain_error);

    // equal diffusivities: the scaling estimate underestimates the scanned
    // max away from threshold but stays within a factor 5
    for (double kl : {0.1, 0.5, 1.0, 1.5}) {
        const AmplitudeEstimate est = max_amplitude(equal_d_params(kl));
        CHECK(est.grid_max / est.estimate > 1.0);
        CHECK(est.grid_max / est.estimate < 5.0);
        CHECK(est.xi_peak > 0.0);
    }
    // ... and becomes exact for the near-price lobe depth toward threshold
    for (double kl : {1.8, 1.85}) {
        const ModelParams p = equal_d_params(kl);
        const AmplitudeEstimate est = max_amplitude(p);
        double lobe = 0.0;
        for (double xi : default_grid(p)) {
            lobe = std::max(lobe, -phi_revealed_equal_d(p, xi));
        }
        CHECK(lobe / est.estimate > 0.5);
        CHECK(lobe / est.estimate < 2.0);
    }
}

TEST_CASE("closed forms reject wrong diffusivities") {
    ModelParams p = zero_dr_params(0.5);
    p.D_revealed = 0.1;
    const auto grid = clustered_grid(20.0, 101, 6.0);
    CHECK_THROWS_AS(stationary_zero_dr(p, grid), std::invalid_argument);
    CHECK_THROWS_AS(jump_at_origin(p), std::invalid_argument);
    CHECK_THROWS_AS(stationary_equal_d(p, grid), std::invalid_argument);
    ModelParams uneq = equal_d_params(0.5);
    uneq.omega_unreveal = 0.5;
    CHECK_THROWS_AS(stationary_equal_d(uneq, grid), std::invalid_argument);
}
