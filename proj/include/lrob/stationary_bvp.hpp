#pragma once

#include "lrob/model.hpp"
#include "lrob/profile.hpp"

namespace lrob {

struct BvpConfig {
    int n_points = 2001;      // grid nodes including the origin
    double xi_max = 0.0;      // 0 -> 20 * max(1/k, ell_latent, ell_revealed)
    double clustering = 6.0;  // exponential grading toward the origin
    double tolerance = 1e-8;  // backward-error bound on the discrete system
    int max_refinements = 2;  // each refinement maps n -> 2n-1

    void validate(const ModelParams& p) const;
    double resolved_xi_max(const ModelParams& p) const;
};

struct BvpDiagnostics {
    double residual = 0.0;
    int refinements = 0;
    int n_points = 0;
    // True when the solution violates the stable-book signs (non-negative
    // revealed slope at the origin, or a non-negative revealed gap for
    // D_revealed = 0). Such profiles are still returned.
    bool unstable = false;
};

struct BvpSolution {
    BookProfile profile;
    BvpDiagnostics diagnostics;
};

// Direct finite-difference solve of the stationary half-line system.
BvpSolution solve_stationary(const ModelParams& p, const BvpConfig& cfg = {});

// One-sided estimate of phi'(0+) from the first two grid nodes, using the
// continuity condition phi(0) = 0; meaningful only for D_revealed > 0.
double slope_at_origin(const BookProfile& b);

// Latent bid density extrapolated to the origin (book overlap measure).
double overlap_proxy(const BookProfile& b);

// |integral of the negative part of phi| over the grid, by trapezoid rule.
double revealed_volume(const BookProfile& b);

} // namespace lrob
