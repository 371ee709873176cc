#include "lrob/banded.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrob {

namespace {

std::size_t checked_storage(int n, int kl, int ku) {
    if (n < 1 || kl < 0 || ku < 0) {
        throw std::invalid_argument("bad banded matrix shape");
    }
    return static_cast<std::size_t>(2 * kl + ku + 1) *
           static_cast<std::size_t>(n);
}

}  // namespace

BandedMatrix::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), a_(checked_storage(n, kl, ku), 0.0),
      piv_(static_cast<std::size_t>(n), 0) {}

double& BandedMatrix::entry(int i, int j) {
    return a_[static_cast<std::size_t>(kl_ + ku_ + i - j) *
                  static_cast<std::size_t>(n_) +
              static_cast<std::size_t>(j)];
}

double BandedMatrix::entry(int i, int j) const {
    return a_[static_cast<std::size_t>(kl_ + ku_ + i - j) *
                  static_cast<std::size_t>(n_) +
              static_cast<std::size_t>(j)];
}

double& BandedMatrix::at(int i, int j) {
    if (i < 0 || i >= n_ || j < 0 || j >= n_ || i - j > kl_ || j - i > ku_) {
        throw std::out_of_range("entry outside declared band");
    }
    return entry(i, j);
}

double BandedMatrix::at(int i, int j) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_ || i - j > kl_ || j - i > ku_) {
        throw std::out_of_range("entry outside declared band");
    }
    return entry(i, j);
}

void BandedMatrix::factor() {
    if (factored_) throw std::logic_error("matrix already factored");
    const int kv = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        const int last = std::min(j + kl_, n_ - 1);
        int p = j;
        double amax = std::abs(entry(j, j));
        for (int i = j + 1; i <= last; ++i) {
            const double v = std::abs(entry(i, j));
            if (v > amax) {
                amax = v;
                p = i;
            }
        }
        if (amax == 0.0) throw std::runtime_error("singular banded matrix");
        piv_[static_cast<std::size_t>(j)] = p;
        const int cend = std::min(j + kv, n_ - 1);
        if (p != j) {
            for (int c = j; c <= cend; ++c) std::swap(entry(p, c), entry(j, c));
        }
        const double pivot = entry(j, j);
        for (int i = j + 1; i <= last; ++i) {
            const double m = entry(i, j) / pivot;
            entry(i, j) = m;
            if (m != 0.0) {
                for (int c = j + 1; c <= cend; ++c) {
                    entry(i, c) -= m * entry(j, c);
                }
            }
        }
    }
    factored_ = true;
}

void BandedMatrix::solve(std::vector<double>& rhs) const {
    if (!factored_) throw std::logic_error("solve requires factor()");
    if (rhs.size() != static_cast<std::size_t>(n_)) {
        throw std::invalid_argument("rhs size mismatch");
    }
    const int kv = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        const int p = piv_[static_cast<std::size_t>(j)];
        if (p != j) std::swap(rhs[static_cast<std::size_t>(p)],
                              rhs[static_cast<std::size_t>(j)]);
        const double xj = rhs[static_cast<std::size_t>(j)];
        if (xj != 0.0) {
            const int last = std::min(j + kl_, n_ - 1);
            for (int i = j + 1; i <= last; ++i) {
                rhs[static_cast<std::size_t>(i)] -= entry(i, j) * xj;
            }
        }
    }
    for (int j = n_ - 1; j >= 0; --j) {
        double v = rhs[static_cast<std::size_t>(j)] / entry(j, j);
        rhs[static_cast<std::size_t>(j)] = v;
        if (v != 0.0) {
            const int first = std::max(0, j - kv);
            for (int i = first; i < j; ++i) {
                rhs[static_cast<std::size_t>(i)] -= entry(i, j) * v;
            }
        }
    }
}

double BandedMatrix::backward_error(const std::vector<double>& x,
                                    const std::vector<double>& rhs) const {
    if (factored_) throw std::logic_error("backward_error needs unfactored matrix");
    if (x.size() != static_cast<std::size_t>(n_) ||
        rhs.size() != static_cast<std::size_t>(n_)) {
        throw std::invalid_argument("size mismatch");
    }
    // Normwise backward error  ||b - Ax||_inf / (||A||_inf ||x||_inf + ||b||_inf).
    // A componentwise ratio would be degenerate on rows whose solution entry is
    // exactly zero (residual and scale are then the same rounding residue).
    double resid = 0.0;
    double norm_a = 0.0;
    double norm_x = 0.0;
    double norm_b = 0.0;
    for (int i = 0; i < n_; ++i) {
        double ax = 0.0;
        double row = 0.0;
        const int jlo = std::max(0, i - kl_);
        const int jhi = std::min(n_ - 1, i + ku_);
        for (int j = jlo; j <= jhi; ++j) {
            const double a = entry(i, j);
            ax += a * x[static_cast<std::size_t>(j)];
            row += std::abs(a);
        }
        resid = std::max(resid, std::abs(ax - rhs[static_cast<std::size_t>(i)]));
        norm_a = std::max(norm_a, row);
        norm_x = std::max(norm_x, std::abs(x[static_cast<std::size_t>(i)]));
        norm_b = std::max(norm_b, std::abs(rhs[static_cast<std::size_t>(i)]));
    }
    const double scale = norm_a * norm_x + norm_b;
    if (scale > 0.0) return resid / scale;
    return resid > 0.0 ? 1.0 : 0.0;
}

std::vector<double> solve_banded(const BandedMatrix& a,
                                 std::vector<double> rhs) {
    BandedMatrix lu = a;
    lu.factor();
    lu.solve(rhs);
    return rhs;
}

} // namespace lrob
