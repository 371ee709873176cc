#include "lrob/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lrob {

const char* provenance_name(ProfileProvenance p) {
    switch (p) {
        case ProfileProvenance::analytic_dr0: return "analytic_dr0";
        case ProfileProvenance::analytic_dreq: return "analytic_dreq";
        case ProfileProvenance::bvp: return "bvp";
        case ProfileProvenance::simulation: return "simulation";
    }
    return "unknown";
}

void BookProfile::validate() const {
    const std::size_t n = grid.size();
    if (n < 2) throw std::invalid_argument("profile needs at least 2 nodes");
    if (rho_latent_bid.size() != n || rho_latent_ask.size() != n ||
        phi_revealed.size() != n) {
        throw std::invalid_argument("profile arrays must have equal length");
    }
    if (!(grid.front() > 0.0)) {
        throw std::invalid_argument("profile grid must start above 0");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("profile grid must be increasing");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(rho_latent_bid[i]) ||
            !std::isfinite(rho_latent_ask[i]) ||
            !std::isfinite(phi_revealed[i])) {
            throw std::invalid_argument("profile values must be finite");
        }
    }
}

static double interp(const std::vector<double>& x, const std::vector<double>& y,
                     double xq, double below, double above) {
    if (xq <= x.front()) return below;
    if (xq >= x.back()) return above;
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (xq - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
}

double BookProfile::latent_bid_at(double xi) const {
    return interp(grid, rho_latent_bid, xi, rho_latent_bid.front(), 0.0);
}

double BookProfile::latent_ask_at(double xi) const {
    return interp(grid, rho_latent_ask, xi, rho_latent_ask.front(),
                  params.L_latent * xi);
}

double BookProfile::phi_at(double xi) const {
    return interp(grid, phi_revealed, xi, phi_revealed.front(), 0.0);
}

double BookProfile::latent_bid_full(double xi) const {
    return xi >= 0.0 ? latent_bid_at(xi) : latent_ask_at(-xi);
}

double BookProfile::latent_ask_full(double xi) const {
    return xi >= 0.0 ? latent_ask_at(xi) : latent_bid_at(-xi);
}

double BookProfile::phi_full(double xi) const {
    return xi >= 0.0 ? phi_at(xi) : -phi_at(-xi);
}

std::vector<double> clustered_grid(double xi_max, int n, double clustering) {
    if (n < 2) throw std::invalid_argument("grid needs at least 2 nodes");
    if (!(xi_max > 0.0)) throw std::invalid_argument("xi_max must be > 0");
    if (clustering < 0.0) throw std::invalid_argument("clustering must be >= 0");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double denom = std::expm1(clustering);
    for (int j = 1; j <= n; ++j) {
        const double s = static_cast<double>(j) / n;
        g[static_cast<std::size_t>(j - 1)] =
            clustering == 0.0 ? xi_max * s
                              : xi_max * std::expm1(clustering * s) / denom;
    }
    return g;
}

std::vector<double> default_grid(const ModelParams& p, int n, double clustering) {
    p.validate();
    const double scale = std::max(1.0 / p.k, p.ell_latent());
    return clustered_grid(20.0 * scale, n, clustering);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_profile_csv(const BookProfile& b, const std::string& path) {
    b.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "xi,rho_latent_bid,rho_latent_ask,phi_revealed\n";
    for (std::size_t i = 0; i < b.size(); ++i) {
        out << format_double(b.grid[i]) << ','
            << format_double(b.rho_latent_bid[i]) << ','
            << format_double(b.rho_latent_ask[i]) << ','
            << format_double(b.phi_revealed[i]) << '\n';
    }
}

BookProfile read_profile_csv(const std::string& path, const ModelParams& params,
                             ProfileProvenance prov) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file " + path);
    if (line == "xi,rho_latent_bid,rho_latent_ask,phi_revealed\r") {
        line.pop_back();
    }
    if (line != "xi,rho_latent_bid,rho_latent_ask,phi_revealed") {
        throw std::runtime_error("bad profile header in " + path);
    }
    BookProfile b;
    b.params = params;
    b.provenance = prov;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        double v[4];
        char comma;
        for (int c = 0; c < 4; ++c) {
            if (c > 0 && !(row >> comma && comma == ',')) {
                throw std::runtime_error("bad profile row in " + path);
            }
            if (!(row >> v[c])) {
                throw std::runtime_error("bad profile row in " + path);
            }
        }
        b.grid.push_back(v[0]);
        b.rho_latent_bid.push_back(v[1]);
        b.rho_latent_ask.push_back(v[2]);
        b.phi_revealed.push_back(v[3]);
    }
    b.validate();
    return b;
}

} // namespace lrob
