#pragma once

#include "scgfm/graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace scgfm {

struct Coupling {
    Eigen::MatrixXd plan;          // N x M, nonnegative
    Eigen::VectorXd row_marginal;  // length N
    Eigen::VectorXd col_marginal;  // length M
    void validate(double tol = 1e-6) const;  // throws integrity_error
};

struct GwResult {
    double cost = 0.0;
    Coupling coupling;
    bool converged = false;
    int iterations = 0;
};

struct SliceSet {
    Eigen::MatrixXd directions;  // L x d, unit rows
    std::uint64_t seed = 0;
    int count() const { return static_cast<int>(directions.rows()); }
    int dim() const { return static_cast<int>(directions.cols()); }
};

SliceSet make_slices(int l, int d, std::uint64_t seed);

// Exhaustive permutation oracle for equal-size uniform instances, n <= 8:
// cost = min_pi sum_{i,k} (a[i][k] - b[pi(i)][pi(k)])^2 / n^2.
GwResult exact_gw(const MmSpace& a, const MmSpace& b);

// Entropic solver: alternating linearization from the product plan with an
// internal epsilon-annealing path down to `epsilon`, log-domain Sinkhorn for
// each linearized step, exact line search on the quadratic objective, and a
// final rounding/local-search refinement whenever the two marginals are
// compatible with a vertex (permutation-like) plan. The reported cost is the
// unregularized objective at the returned plan.
GwResult entropic_gw(const MmSpace& a, const MmSpace& b, double epsilon = 0.01,
                     double tol = 1e-7, int max_outer = 50, int max_inner = 100);

// Quadratic GW objective at a fixed plan, via the factorized expansion
// (never the quartic loop).
double gw_cost_at(const MmSpace& a, const MmSpace& b, const Coupling& t);

// Spectral lift to d coordinates: eigenpairs of largest |lambda|, column j =
// v_j * sqrt(|lambda_j|), zero-padded when rank < d; each eigenvector is
// flipped so its largest-absolute entry is positive. Dense decomposition up
// to 256 nodes, orthogonal (subspace) iteration above.
Eigen::MatrixXd spectral_embed(const MmSpace& a, int d = 8);

// One-dimensional GW for point sets with weights, positions sorted ascending.
// Structure matrices are the signed pairwise differences; the solver evaluates
// the monotone north-west-corner coupling and the anti-monotone one and keeps
// the cheaper (optimal for equal-size uniform weights, a heuristic otherwise).
struct Weighted1d {
    Eigen::VectorXd pos;  // sorted ascending
    Eigen::VectorXd w;    // probability vector
};
struct Gw1dResult {
    double cost = 0.0;
    // sparse staircase coupling: (row, col, mass)
    std::vector<std::tuple<int, int, double>> plan;
};
Gw1dResult gw_1d(const Weighted1d& x, const Weighted1d& y);

// Sliced GW: spectral lift, project onto each direction, sort, 1D GW per
// slice; cost = mean slice cost; coupling = average of per-slice staircase
// couplings followed by one marginal-repair pass.
GwResult sliced_gw(const MmSpace& a, const MmSpace& b, const SliceSet& slices);

// Cost-only variant: identical slice loop but skips assembling the dense
// coupling, so the whole call stays quasi-linear in the node counts. Used
// where only the discrepancy value is needed (e.g. scaling benchmarks).
double sliced_gw_cost(const MmSpace& a, const MmSpace& b, const SliceSet& slices);

// Envelope gradient of gw_cost_at with respect to b.structure at fixed plan:
// 2 * (b[j][l] * q_j * q_l - (T' A T)[j][l]), symmetrized, zero diagonal.
Eigen::MatrixXd gw_gradient_b(const MmSpace& a, const MmSpace& b, const Coupling& t);

}  // namespace scgfm
