#pragma once

#include <string>
#include <vector>

#include "lrob/model.hpp"
#include "lrob/particle_sim.hpp"

namespace lrob {

// Li_2(y) = sum_{k>=1} y^k / k^2 on [0, 1], series plus the reflection
// identity near 1; absolute error below 1e-12.
double dilogarithm(double y);

// Volume swept from a static stationary book when the price has moved by
// `price`: Q = -integral of phi over [0, price]. Closed forms for the two
// analytic books; both grow monotonically for k*ell_latent <= 1 and saturate
// at the available revealed volume.
double swept_volume_zero_dr(const ModelParams& p, double price);
double swept_volume_equal_d(const ModelParams& p, double price);

// Total revealed volume available to one side of the book (the saturation
// value of the swept volume). Closed forms for D_revealed = 0 and
// D_revealed = D_latent, numeric profile integration otherwise. Throws
// std::domain_error when the book is too close to its stability threshold
// for the closed form to stay positive.
double revealed_volume_available(const ModelParams& p);

// Price displacement that sweeps volume Q out of the static book, by
// monotone bisection to |dQ|/Q < 1e-10. Throws std::domain_error when
// Q reaches the available revealed volume (diverging impact).
double geometric_impact_zero_dr(const ModelParams& p, double Q);
double geometric_impact_equal_d(const ModelParams& p, double Q);

// Small-volume expansions of the two inversions: square-root growth against
// a revealed book vanishing linearly at the price, linear growth against the
// finite revealed gap of the frozen book.
double short_time_impact_sqrt(const ModelParams& p, double Q);
double short_time_impact_linear(const ModelParams& p, double Q);

// Reference impact curves of the purely latent (LLOB) limit. The slow branch
// needs the execution rate m0; its participation ratio is m0 / (D_latent L).
enum class LlobRegime { fast, slow };
double llob_reference(const ModelParams& p, double Q, LlobRegime regime,
                      double m0 = 0.0);

struct MetaorderSpec {
    double m0 = 0.0;       // signed execution rate, volume per unit time
    double duration = 0.0; // execution time

    void validate() const; // throws std::invalid_argument

    // participation ratios against the book's refill currents
    double rate_vs_conversion_flux(const ModelParams& p) const; // m0 k^2/(L w)
    double rate_vs_revealed_flux(const ModelParams& p) const;   // m0/(D_r L)
    double rate_vs_latent_flux(const ModelParams& p) const;     // m0/(D_l L)
};

// Volume scale of the crossover from consuming the standing revealed book to
// consuming freshly revealed liquidity, in time units: V_r / |m0|.
double crossover_time_estimate(const ModelParams& p, double m0);

// Ensemble-averaged response to a constant-rate metaorder executed as market
// orders against the simulated book. Arrays are aligned on t; q = m0 * t.
// impact_mean is the ensemble mean of (trade price - start price); fair_mean
// is (fair price - start price); imbalance is the relative revealed volume
// difference (V_bid - V_ask)/(V_bid + V_ask); fair_distance is
// |p_t - p_t_fair| / |p_t - p_0| (zero until the price first moves).
struct ImpactTrajectory {
    std::vector<double> t;
    std::vector<double> q;
    std::vector<double> impact_mean;
    std::vector<double> impact_stderr;
    std::vector<double> fair_mean;
    std::vector<double> imbalance_mean;
    std::vector<double> fair_distance_mean;
    MetaorderSpec order;
    int ensemble = 0;
    int completed = 0;  // members that ran the full duration
    bool crisis = false; // truncated at the earliest member liquidity crisis
};

struct MetaorderConfig {
    SimConfig sim;       // sim.seed is the ensemble master seed
    MetaorderSpec order;
    int ensemble = 64;
    int record_stride = 1;
    int workers = 1;

    void validate() const; // throws std::invalid_argument
};

// Runs ensemble members from the stationary book (analytic profile when one
// exists, BVP solve otherwise, then sim.burn_in free steps). Member streams
// are independent; the reduction is deterministic in member order.
ImpactTrajectory run_metaorder(const MetaorderConfig& cfg);

// Least-squares slope of log(impact) vs log(q) over q in [q_min, q_max].
double fit_impact_exponent(const ImpactTrajectory& traj, double q_min,
                           double q_max);

// CSV fields: t,q,price_mean,price_stderr,fair_price_mean,imbalance_mean,
// fair_distance_mean
void write_trajectory_csv(const ImpactTrajectory& traj,
                          const std::string& path);
// Run metadata (rates, participation ratios, ensemble bookkeeping) as JSON.
std::string impact_metadata_json(const MetaorderConfig& cfg,
                                 const ImpactTrajectory& traj);

namespace detail {
// Dimensionless swept volume, u = k * price, zeta = k * ell_latent;
// Q = (L/k^2) q_tilde (times omega_reveal/omega_unreveal for the frozen
// book). The equal-lengths form has a removable singularity at zeta = 1;
// the stable branch clears it exactly.
double q_tilde_zero_dr(double u, double zeta);
double q_tilde_equal_d(double u, double zeta);
double q_tilde_equal_d_raw(double u, double zeta);
double q_tilde_equal_d_stable(double u, double zeta);
// Saturation values q_tilde(u -> infinity).
double v_tilde_zero_dr(double zeta);
double v_tilde_equal_d(double zeta);
} // namespace detail

} // namespace lrob
