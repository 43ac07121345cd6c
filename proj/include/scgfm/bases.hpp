#pragma once

#include "scgfm/graph.hpp"
#include "scgfm/ot.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace scgfm {

// Dispatching wrapper over the GW solver family so callers pick a solver by
// value. `slices` must be set when kind == sliced.
struct GwSolver {
    enum Kind { entropic, sliced, exact } kind = entropic;
    double epsilon = 0.01;
    double tol = 1e-7;
    int max_outer = 50;
    int max_inner = 100;
    std::shared_ptr<const SliceSet> slices;

    GwResult solve(const MmSpace& a, const MmSpace& b) const;
    static GwSolver make(Kind kind, double epsilon = 0.01,
                         std::shared_ptr<const SliceSet> slices = nullptr);
};

// Trainable dictionary of geometric bases: K symmetric hollow M×M matrices
// with entries in [0,1] and a shared uniform measure.
struct BaseDictionary {
    std::vector<Eigen::MatrixXd> bases;
    Eigen::VectorXd base_measure;  // uniform 1/M
    double temperature = 0.3;
    double margin = 10.0;

    int k() const { return static_cast<int>(bases.size()); }
    int m() const { return static_cast<int>(base_measure.size()); }
    MmSpace base_space(int idx) const;
    void validate() const;
};

// Structural coordinates of one graph against the dictionary: per-base GW
// costs (deltas), softmax weights, and the transport plans that produced them.
struct CoordinateResult {
    Eigen::VectorXd weights;  // simplex, = softmax(-deltas / tau)
    Eigen::VectorXd deltas;   // nonnegative
    std::vector<Coupling> couplings;
};

struct DiversityResult {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> gradients;
};

BaseDictionary init_dictionary(int k, int m, std::uint64_t seed);

// Symmetrize, zero the diagonal, clamp to [0,1]; idempotent.
Eigen::MatrixXd project_constraints(const Eigen::MatrixXd& b);

Eigen::VectorXd softmax(const Eigen::VectorXd& x);

CoordinateResult structural_coordinates(const MmSpace& a, const BaseDictionary& dict,
                                        const GwSolver& solver);

// Weighted average of the bases; convexity keeps all base invariants.
Eigen::MatrixXd linear_surrogate(const BaseDictionary& dict, const Eigen::VectorXd& weights);

// Mean hinge on pairwise Frobenius distances below the margin, with
// subgradients (0 at the kink and for coincident pairs).
DiversityResult diversity_loss(const BaseDictionary& dict);

}  // namespace scgfm
