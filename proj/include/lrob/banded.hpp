#pragma once

#include <vector>

namespace lrob {

// General banded matrix with kl sub- and ku super-diagonals, stored in
// LAPACK-style band layout with room for partial-pivoting fill-in.
class BandedMatrix {
public:
    BandedMatrix(int n, int kl, int ku);

    int size() const { return n_; }
    int lower() const { return kl_; }
    int upper() const { return ku_; }

    // Assembly access; (i, j) must lie within the declared band.
    double& at(int i, int j);
    double at(int i, int j) const;

    // LU factorization with partial pivoting, in place.
    void factor();
    bool factored() const { return factored_; }

    // Solve A x = rhs in place; requires factor() first.
    void solve(std::vector<double>& rhs) const;

    // Infinity-norm componentwise backward error of a candidate solution,
    // measured against an unfactored copy of the matrix.
    double backward_error(const std::vector<double>& x,
                          const std::vector<double>& rhs) const;

private:
    double& entry(int i, int j);
    double entry(int i, int j) const;

    int n_, kl_, ku_;
    bool factored_ = false;
    std::vector<double> a_;
    std::vector<int> piv_;
};

// Convenience: factor a copy and return the solution.
std::vector<double> solve_banded(const BandedMatrix& a,
                                 std::vector<double> rhs);

} // namespace lrob
