#pragma once

#include <string>

namespace lrob {

// Conversion profile between the latent and revealed books. Only the
// exponential profile is implemented: full conversion on the aggressive side
// of the price, exponential falloff on the passive side.
enum class ConversionProfile { exponential };

// Fraction of the conversion rate active at scaled distance y from the price:
// 1 for y <= 0, exp(-y) for y > 0.
double gamma_profile(double y);

// Shape factor 2 z^2 (2+z)^2 / ((1+z)^2 (8+3z)) appearing in the
// equal-diffusivity stationary solution. g(1) = 9/22, g(2) = 128/126,
// g(z) ~ z^2 as z -> 0.
double g_factor(double z);

// Parameters of the latent/revealed book model. Densities are per unit
// price, so L_latent (the slope of the latent ramp) is volume / price^2.
struct ModelParams {
    double D_latent = 1.0;     // latent diffusivity, > 0
    double D_revealed = 0.0;   // revealed diffusivity, >= 0
    double omega_reveal = 1.0; // conversion rate latent -> revealed, > 0
    double omega_unreveal = 1.0; // conversion rate revealed -> latent, > 0
    double k = 1.0;            // inverse conversion depth, > 0
    double L_latent = 1.0;     // latent ramp slope, > 0
    ConversionProfile profile = ConversionProfile::exponential;

    void validate() const; // throws std::invalid_argument
    bool equal_rates() const;

    double ell_latent() const;   // sqrt(D_latent / omega_reveal)
    double ell_revealed() const; // sqrt(D_revealed / omega_reveal)

    // dimensionless groups
    double zeta_latent() const { return k * ell_latent(); }
    double zeta_revealed() const { return k * ell_revealed(); }
};

// Characteristic scales deduced from the parameters. zeta_c is the critical
// value of k*ell_latent for the book's diffusivity ratio; the analytic values
// exist for D_revealed = 0 and D_revealed = D_latent, the numeric stability
// map supplies intermediate ratios.
struct DerivedScales {
    double ell_latent;
    double ell_revealed;
    double conversion_flux; // J   = L omega / k^2
    double revealed_flux;   // J_r = D_revealed L
    double omega_critical;  // D_latent k^2 / zeta_c^2
};

DerivedScales derived_scales(const ModelParams& p, double zeta_c);

// rescalings used throughout: prices by k, densities by k/L, times by omega
inline double scaled_coord(const ModelParams& p, double xi) { return p.k * xi; }
inline double scaled_density(const ModelParams& p, double rho) {
    return p.k * rho / p.L_latent;
}
inline double scaled_time(const ModelParams& p, double t) {
    return p.omega_reveal * t;
}

// Strict JSON I/O. Accepted keys: D_latent, D_revealed, omega, k, L_latent
// and optional omega_unreveal (defaults to omega). Unknown keys, missing
// keys and non-numeric values are rejected with std::invalid_argument.
ModelParams params_from_json_text(const std::string& text);
ModelParams params_from_json_file(const std::string& path);
std::string params_to_json_text(const ModelParams& p);

} // namespace lrob
