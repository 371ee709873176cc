#include "lrob/stationary_bvp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrob/banded.hpp"

namespace lrob {

void BvpConfig::validate(const ModelParams& p) const {
    p.validate();
    if (n_points < 101) throw std::invalid_argument("n_points must be >= 101");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
    if (max_refinements < 0) {
        throw std::invalid_argument("max_refinements must be >= 0");
    }
    if (clustering < 0.0) throw std::invalid_argument("clustering must be >= 0");
    const double floor = 10.0 * std::max(1.0 / p.k, p.ell_latent());
    if (resolved_xi_max(p) < floor) {
        throw std::invalid_argument("xi_max below 10 * max(1/k, ell_latent)");
    }
}

double BvpConfig::resolved_xi_max(const ModelParams& p) const {
    if (xi_max > 0.0) return xi_max;
    return 20.0 * std::max({1.0 / p.k, p.ell_latent(), p.ell_revealed()});
}

namespace {

struct DerivStencil {
    double c0, c1, c2; // coefficients on nodes (anchor, next, next-next)
    double scale;      // row scale that keeps coefficients O(1)
};

// First derivative at x0 from nodes (x0, x1, x2), second order.
DerivStencil one_sided_deriv(double x0, double x1, double x2) {
    const double h1 = x1 - x0;
    const double h2 = x2 - x1;
    DerivStencil s;
    s.c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    s.c1 = (h1 + h2) / (h1 * h2);
    s.c2 = -h1 / (h2 * (h1 + h2));
    s.scale = h1;
    return s;
}

struct SecondDiff {
    double cm, cc, cp;
};

SecondDiff second_diff(double hm, double hp) {
    SecondDiff d;
    d.cm = 2.0 / (hm * (hm + hp));
    d.cc = -2.0 / (hm * hp);
    d.cp = 2.0 / (hp * (hm + hp));
    return d;
}

std::vector<double> make_nodes(const ModelParams& p, const BvpConfig& cfg,
                               int n_points) {
    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(n_points));
    nodes.push_back(0.0);
    const auto tail =
        clustered_grid(cfg.resolved_xi_max(p), n_points - 1, cfg.clustering);
    nodes.insert(nodes.end(), tail.begin(), tail.end());
    return nodes;
}

struct Assembled {
    BandedMatrix matrix;
    std::vector<double> rhs;
};

// Full system for D_revealed > 0. Unknowns per node j: latent bid b_j,
// latent ask deviation a_j = rho_A - L*xi, revealed imbalance f_j,
// interleaved as (3j, 3j+1, 3j+2).
Assembled assemble_full(const ModelParams& p, const std::vector<double>& x) {
    const int N = static_cast<int>(x.size()) - 1;
    const int n = 3 * (N + 1);
    Assembled sys{BandedMatrix(n, 7, 7), std::vector<double>(n, 0.0)};
    BandedMatrix& A = sys.matrix;
    const double dl = p.D_latent / p.omega_reveal;
    const double dr = p.D_revealed / p.omega_reveal;
    const double beta = p.omega_unreveal / p.omega_reveal;
    auto ib = [](int j) { return 3 * j; };
    auto ia = [](int j) { return 3 * j + 1; };
    auto ifn = [](int j) { return 3 * j + 2; };

    A.at(ib(0), ib(0)) = 1.0;
    A.at(ib(0), ia(0)) = -1.0;
    const DerivStencil d0 = one_sided_deriv(x[0], x[1], x[2]);
    const double carr[3] = {d0.c0, d0.c1, d0.c2};
    for (int i = 0; i < 3; ++i) {
        A.at(ia(0), ib(i)) = d0.scale * carr[i];
        A.at(ia(0), ia(i)) = d0.scale * carr[i];
    }
    sys.rhs[static_cast<std::size_t>(ia(0))] = -p.L_latent * d0.scale;
    A.at(ifn(0), ifn(0)) = 1.0;

    for (int j = 1; j < N; ++j) {
        const SecondDiff d = second_diff(x[static_cast<std::size_t>(j)] -
                                             x[static_cast<std::size_t>(j - 1)],
                                         x[static_cast<std::size_t>(j + 1)] -
                                             x[static_cast<std::size_t>(j)]);
        const double xi = x[static_cast<std::size_t>(j)];
        const double gam = gamma_profile(p.k * xi);
        const double src = gam * p.L_latent * xi;

        A.at(ib(j), ib(j - 1)) = dl * d.cm;
        A.at(ib(j), ib(j)) = dl * d.cc - 1.0;
        A.at(ib(j), ib(j + 1)) = dl * d.cp;

        A.at(ia(j), ia(j - 1)) = dl * d.cm;
        A.at(ia(j), ia(j)) = dl * d.cc - gam;
        A.at(ia(j), ia(j + 1)) = dl * d.cp;
        A.at(ia(j), ifn(j)) = -beta * (1.0 - gam);
        sys.rhs[static_cast<std::size_t>(ia(j))] = src;

        A.at(ifn(j), ifn(j - 1)) = dr * d.cm;
        A.at(ifn(j), ifn(j)) = dr * d.cc - beta * (1.0 - gam);
        A.at(ifn(j), ifn(j + 1)) = dr * d.cp;
        A.at(ifn(j), ib(j)) = 1.0;
        A.at(ifn(j), ia(j)) = -gam;
        sys.rhs[static_cast<std::size_t>(ifn(j))] = src;
    }

    A.at(ib(N), ib(N)) = 1.0;
    const DerivStencil dN = one_sided_deriv(
        x[static_cast<std::size_t>(N)], x[static_cast<std::size_t>(N - 1)],
        x[static_cast<std::size_t>(N - 2)]);
    const double darr[3] = {dN.c0, dN.c1, dN.c2};
    for (int i = 0; i < 3; ++i) {
        A.at(ia(N), ia(N - i)) = -dN.scale * darr[i];
    }
    A.at(ifn(N), ifn(N)) = 1.0;
    return sys;
}

// Reduced system for D_revealed = 0: the revealed balance is algebraic, so
// only (b, a) are solved; unknowns interleaved as (2j, 2j+1).
Assembled assemble_reduced(const ModelParams& p, const std::vector<double>& x) {
    const int N = static_cast<int>(x.size()) - 1;
    const int n = 2 * (N + 1);
    Assembled sys{BandedMatrix(n, 5, 5), std::vector<double>(n, 0.0)};
    BandedMatrix& A = sys.matrix;
    const double dl = p.D_latent / p.omega_reveal;
    auto ib = [](int j) { return 2 * j; };
    auto ia = [](int j) { return 2 * j + 1; };

    A.at(ib(0), ib(0)) = 1.0;
    A.at(ib(0), ia(0)) = -1.0;
    const DerivStencil d0 = one_sided_deriv(x[0], x[1], x[2]);
    const double carr[3] = {d0.c0, d0.c1, d0.c2};
    for (int i = 0; i < 3; ++i) {
        A.at(ia(0), ib(i)) = d0.scale * carr[i];
        A.at(ia(0), ia(i)) = d0.scale * carr[i];
    }
    sys.rhs[static_cast<std::size_t>(ia(0))] = -p.L_latent * d0.scale;

    for (int j = 1; j < N; ++j) {
        const SecondDiff d = second_diff(x[static_cast<std::size_t>(j)] -
                                             x[static_cast<std::size_t>(j - 1)],
                                         x[static_cast<std::size_t>(j + 1)] -
                                             x[static_cast<std::size_t>(j)]);
        A.at(ib(j), ib(j - 1)) = dl * d.cm;
        A.at(ib(j), ib(j)) = dl * d.cc - 1.0;
        A.at(ib(j), ib(j + 1)) = dl * d.cp;

        A.at(ia(j), ia(j - 1)) = dl * d.cm;
        A.at(ia(j), ia(j)) = dl * d.cc;
        A.at(ia(j), ia(j + 1)) = dl * d.cp;
        A.at(ia(j), ib(j)) = -1.0;
    }

    A.at(ib(N), ib(N)) = 1.0;
    const DerivStencil dN = one_sided_deriv(
        x[static_cast<std::size_t>(N)], x[static_cast<std::size_t>(N - 1)],
        x[static_cast<std::size_t>(N - 2)]);
    const double darr[3] = {dN.c0, dN.c1, dN.c2};
    for (int i = 0; i < 3; ++i) {
        A.at(ia(N), ia(N - i)) = -dN.scale * darr[i];
    }
    return sys;
}

BookProfile extract_profile(const ModelParams& p, const std::vector<double>& x,
                            const std::vector<double>& u, bool reduced) {
    const std::size_t N = x.size() - 1;
    BookProfile b;
    b.params = p;
    b.provenance = ProfileProvenance::bvp;
    b.grid.assign(x.begin() + 1, x.end());
    b.rho_latent_bid.resize(N);
    b.rho_latent_ask.resize(N);
    b.phi_revealed.resize(N);
    const double rate_ratio = p.omega_reveal / p.omega_unreveal;
    for (std::size_t j = 1; j <= N; ++j) {
        const double xi = x[j];
        const std::size_t stride = reduced ? 2 : 3;
        const double bj = u[stride * j];
        const double aj = u[stride * j + 1];
        b.rho_latent_bid[j - 1] = bj;
        b.rho_latent_ask[j - 1] = aj + p.L_latent * xi;
        if (reduced) {
            const double gam = gamma_profile(p.k * xi);
            b.phi_revealed[j - 1] =
                rate_ratio * (bj - gam * (aj + p.L_latent * xi)) / (1.0 - gam);
        } else {
            b.phi_revealed[j - 1] = u[3 * j + 2];
        }
    }
    b.validate();
    return b;
}

} // namespace

BvpSolution solve_stationary(const ModelParams& p, const BvpConfig& cfg) {
    cfg.validate(p);
    const bool reduced = p.D_revealed == 0.0;
    int n = cfg.n_points;
    for (int attempt = 0;; ++attempt) {
        const std::vector<double> nodes = make_nodes(p, cfg, n);
        Assembled sys = reduced ? assemble_reduced(p, nodes)
                                : assemble_full(p, nodes);
        const std::vector<double> u = solve_banded(sys.matrix, sys.rhs);
        const double residual = sys.matrix.backward_error(u, sys.rhs);
        if (residual <= cfg.tolerance) {
            BvpSolution out;
            out.profile = extract_profile(p, nodes, u, reduced);
            out.diagnostics.residual = residual;
            out.diagnostics.refinements = attempt;
            out.diagnostics.n_points = n;
            out.diagnostics.unstable =
                reduced ? out.profile.phi_revealed.front() >= 0.0
                        : slope_at_origin(out.profile) >= 0.0;
            return out;
        }
        if (attempt == cfg.max_refinements) {
            throw std::runtime_error(
                "stationary solve: residual " + std::to_string(residual) +
                " above tolerance after " + std::to_string(attempt) +
                " refinements");
        }
        n = 2 * n - 1;
    }
}

double slope_at_origin(const BookProfile& b) {
    b.validate();
    const double xa = b.grid[0];
    const double xb = b.grid[1];
    const double fa = b.phi_revealed[0];
    const double fb = b.phi_revealed[1];
    return fa * xb / (xa * (xb - xa)) - fb * xa / (xb * (xb - xa));
}

double overlap_proxy(const BookProfile& b) {
    b.validate();
    if (b.size() < 3) throw std::invalid_argument("need at least 3 nodes");
    const double x0 = b.grid[0];
    const double x1 = b.grid[1];
    const double x2 = b.grid[2];
    const double y0 = b.rho_latent_bid[0];
    const double y1 = b.rho_latent_bid[1];
    const double y2 = b.rho_latent_bid[2];
    return y0 * x1 * x2 / ((x1 - x0) * (x2 - x0)) +
           y1 * x0 * x2 / ((x0 - x1) * (x2 - x1)) +
           y2 * x0 * x1 / ((x0 - x2) * (x1 - x2));
}

double revealed_volume(const BookProfile& b) {
    b.validate();
    double total = 0.0;
    auto neg = [&](std::size_t i) { return std::min(b.phi_revealed[i], 0.0); };
    total += neg(0) * b.grid[0];
    for (std::size_t i = 1; i < b.size(); ++i) {
        total += 0.5 * (neg(i - 1) + neg(i)) * (b.grid[i] - b.grid[i - 1]);
    }
    return std::abs(total);
}

} // namespace lrob
