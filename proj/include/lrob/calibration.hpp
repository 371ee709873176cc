#pragma once

#include <array>
#include <string>
#include <vector>

#include "lrob/stationary_bvp.hpp"
#include "lrob/stability_map.hpp"

namespace lrob {

enum class BookSide { bid, ask };

struct SnapshotRecord {
    std::string timestamp;  // grouping key: one snapshot per distinct stamp
    BookSide side = BookSide::bid;
    double price = 0.0;  // currency
    double size = 0.0;   // shares
};

// Binning of folded snapshots. Offsets are measured from the opposite best
// quote and expressed as a percentage of the sample-average price; bins of
// `bin_width` (% price) cover [0, n_bins * bin_width). `tick_size` converts
// the average spread to tick units; `daily_volume` is pass-through metadata.
struct IngestConfig {
    double bin_width = 0.01;  // % of average price
    int n_bins = 400;
    double tick_size = 0.01;  // currency
    double daily_volume = 0.0;

    void validate() const;  // throws std::invalid_argument
};

struct EmpiricalBookProfile {
    std::vector<double> offset;       // bin centers, % of average price
    std::vector<double> density;      // shares per % price, one-side average
    std::vector<double> density_var;  // sample variance across snapshots
    int snapshots = 0;  // snapshots folded in
    int skipped = 0;    // snapshots dropped: crossed, one-sided, malformed
    double average_price = 0.0;
    double average_spread_ticks = 0.0;
    double daily_volume = 0.0;

    int informative_bins() const;  // bins with positive density
};

// Strict reader: header "timestamp,side,price,size", side B or A; throws
// std::runtime_error on an unreadable file or any malformed row.
std::vector<SnapshotRecord> read_snapshot_csv(const std::string& path);

// Lenient folding pipeline. Each file is parsed row by row; a malformed row
// poisons its snapshot (rows grouped by timestamp within one file), and
// poisoned, crossed, or one-sided snapshots are skipped and counted. Two
// passes: the first fixes the average price (and spread), the second bins
// each order at its distance from the opposite best, bid side reflected onto
// the ask side, both sides averaged together.
EmpiricalBookProfile ingest_snapshots(const std::vector<std::string>& files,
                                      const IngestConfig& cfg);
// Same fold for in-memory records (grouped by timestamp alone).
EmpiricalBookProfile ingest_records(const std::vector<SnapshotRecord>& records,
                                    const IngestConfig& cfg);

enum class FitWeights { uniform, inverse_variance };

struct FitConfig {
    int n_starts = 8;         // multi-starts spanning the plausible shapes
    int max_iterations = 60;  // damped Gauss-Newton outer iterations
    double fd_step = 5e-4;    // central-difference step in log-parameters
    double tolerance = 1e-12; // relative objective improvement floor
    FitWeights weights = FitWeights::uniform;
    int workers = 1;

    void validate() const;  // throws std::invalid_argument
};

struct FitResult {
    double L_latent = 0.0;    // shares per % price
    double k = 0.0;           // 1 / % price
    double l_latent = 0.0;    // % price
    double l_revealed = 0.0;  // % price
    double residual_rms = 0.0;
    // curvature proxies: stderr of L from its linear profiling, stderr of
    // (ln k, ln l_latent, ln l_revealed) from the Gauss-Newton normal matrix
    double L_stderr = 0.0;
    std::array<double, 3> log_stderr{0.0, 0.0, 0.0};
    double zeta_latent = 0.0;    // k * l_latent
    double zeta_revealed = 0.0;  // k * l_revealed
    int starts_converged = 0;
    int best_start = -1;
    int iterations = 0;  // of the winning start
};

// Nonlinear least squares of the folded density against |phi_r| of the
// stationary book, shape solved on unit depth and unit rates (so D = l^2).
// L_latent enters linearly and is profiled out each iterate; the remaining
// three parameters run in log space through damped Gauss-Newton from
// n_starts initial points; the lowest weighted SSR wins (ties to the lowest
// start index). Throws std::invalid_argument for degenerate profiles
// (< 20 informative bins) and std::runtime_error when no start converges.
FitResult fit(const EmpiricalBookProfile& profile, const BvpConfig& solver,
              const FitConfig& cfg);

// Places the fitted parameters against a critical line: dimensionless
// coordinates, ratio, threshold, margin, and the stability flag.
AssetLocation stability_report(const FitResult& fit, const CriticalLine& line);

std::string fit_json(const FitResult& fit);
// One summary row: price,spread_ticks,daily_volume,L_latent,k,l_latent,
// l_revealed.
void write_fit_csv(const EmpiricalBookProfile& profile, const FitResult& fit,
                   const std::string& path);

}  // namespace lrob
