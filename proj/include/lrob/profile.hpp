#pragma once

#include <string>
#include <vector>

#include "lrob/model.hpp"

namespace lrob {

enum class ProfileProvenance { analytic_dr0, analytic_dreq, bvp, simulation };

const char* provenance_name(ProfileProvenance p);

// Stationary book on the half line xi > 0 (distance above the price).
// rho_latent_bid decays away from the price, rho_latent_ask carries the
// ramp L*xi, phi_revealed is the signed revealed density (negative where
// sell volume is revealed). The xi < 0 side follows by symmetry:
// rho_B(-xi) = rho_A(xi) and phi(-xi) = -phi(xi).
struct BookProfile {
    std::vector<double> grid; // strictly increasing, grid[0] > 0
    std::vector<double> rho_latent_bid;
    std::vector<double> rho_latent_ask;
    std::vector<double> phi_revealed;
    ModelParams params;
    ProfileProvenance provenance = ProfileProvenance::bvp;

    void validate() const; // throws std::invalid_argument
    std::size_t size() const { return grid.size(); }

    // linear interpolation of the half-line fields; xi beyond the grid uses
    // the far-field form (ramp for rho_latent_ask, zero otherwise)
    double latent_bid_at(double xi) const;
    double latent_ask_at(double xi) const;
    double phi_at(double xi) const;

    // full-line evaluation through the symmetry relations, xi of either sign
    double latent_bid_full(double xi) const;
    double latent_ask_full(double xi) const;
    double phi_full(double xi) const;
};

// Log-clustered half-line grid: n strictly positive nodes, dense near the
// price, reaching xi_max = 20 * max(1/k, ell_latent).
std::vector<double> default_grid(const ModelParams& p, int n = 2001,
                                 double clustering = 6.0);
std::vector<double> clustered_grid(double xi_max, int n, double clustering);

// CSV with the mandatory header xi,rho_latent_bid,rho_latent_ask,phi_revealed
void write_profile_csv(const BookProfile& b, const std::string& path);
BookProfile read_profile_csv(const std::string& path, const ModelParams& params,
                             ProfileProvenance prov);

// deterministic float formatting shared by all CSV writers
std::string format_double(double v);

} // namespace lrob
