#include "scgfm/bases.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <cmath>
#include <string>

namespace scgfm {

// ============================================================ solver dispatch

GwResult GwSolver::solve(const MmSpace& a, const MmSpace& b) const {
    switch (kind) {
        case entropic:
            return entropic_gw(a, b, epsilon, tol, max_outer, max_inner);
        case sliced:
            if (!slices) throw integrity_error("sliced solver needs a slice set");
            return sliced_gw(a, b, *slices);
        case exact:
            return exact_gw(a, b);
    }
    throw integrity_error("unknown solver kind");
}

GwSolver GwSolver::make(Kind kind, double epsilon, std::shared_ptr<const SliceSet> slices) {
    GwSolver s;
    s.kind = kind;
    s.epsilon = epsilon;
    s.slices = std::move(slices);
    return s;
}

// ============================================================ dictionary

MmSpace BaseDictionary::base_space(int idx) const {
    if (idx < 0 || idx >= k()) throw index_error("base index out of range");
    return mm_from_dense(bases[idx], base_measure);
}

void BaseDictionary::validate() const {
    if (k() < 1 || m() < 2) throw integrity_error("dictionary needs K >= 1, M >= 2");
    if (temperature <= 0.0 || margin <= 0.0)
        throw integrity_error("dictionary needs positive temperature and margin");
    for (int i = 0; i < k(); ++i) {
        const Eigen::MatrixXd& b = bases[i];
        if (b.rows() != m() || b.cols() != m()) throw integrity_error("base shape mismatch");
        if (!b.allFinite()) throw numerical_error("non-finite base entry");
        if ((b - b.transpose()).cwiseAbs().maxCoeff() > 0.0)
            throw integrity_error("base " + std::to_string(i) + " not symmetric");
        if (b.diagonal().cwiseAbs().maxCoeff() > 0.0)
            throw integrity_error("base " + std::to_string(i) + " not hollow");
        if (b.minCoeff() < 0.0 || b.maxCoeff() > 1.0)
            throw integrity_error("base " + std::to_string(i) + " out of [0,1]");
    }
}

BaseDictionary init_dictionary(int k, int m, std::uint64_t seed) {
    if (k < 1 || m < 2) throw integrity_error("init_dictionary needs K >= 1, M >= 2");
    BaseDictionary d;
    d.base_measure = Eigen::VectorXd::Constant(m, 1.0 / m);
    Rng rng(seed);
    d.bases.reserve(k);
    for (int b = 0; b < k; ++b) {
        Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) mat(i, j) = mat(j, i) = rng.uniform01();
        d.bases.push_back(std::move(mat));
    }
    return d;
}

Eigen::MatrixXd project_constraints(const Eigen::MatrixXd& b) {
    if (!b.allFinite()) throw numerical_error("project_constraints: non-finite input");
    Eigen::MatrixXd out = 0.5 * (b + b.transpose());
    out.diagonal().setZero();
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

// ============================================================ coordinates

Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
    const Eigen::ArrayXd e = (x.array() - x.maxCoeff()).exp();
    return (e / e.sum()).matrix();
}

CoordinateResult structural_coordinates(const MmSpace& a, const BaseDictionary& dict,
                                        const GwSolver& solver) {
    dict.validate();
    CoordinateResult r;
    const int k = dict.k();
    r.deltas.resize(k);
    r.couplings.resize(k);
    for (int i = 0; i < k; ++i) {
        try {
            GwResult g = solver.solve(a, dict.base_space(i));
            r.deltas[i] = std::max(0.0, g.cost);
            r.couplings[i] = std::move(g.coupling);
        } catch (const error& e) {
            throw error("structural_coordinates: base " + std::to_string(i) + ": " + e.what());
        }
    }
    r.weights = softmax(-r.deltas / dict.temperature);
    return r;
}

Eigen::MatrixXd linear_surrogate(const BaseDictionary& dict, const Eigen::VectorXd& weights) {
    if (weights.size() != dict.k()) throw integrity_error("linear_surrogate: weight length mismatch");
    if (std::abs(weights.sum() - 1.0) > 1e-9 || weights.minCoeff() < -1e-12)
        throw integrity_error("linear_surrogate: weights not in the simplex");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dict.m(), dict.m());
    for (int i = 0; i < dict.k(); ++i) out += weights[i] * dict.bases[i];
    return out;
}

// ============================================================ diversity

DiversityResult diversity_loss(const BaseDictionary& dict) {
    DiversityResult r;
    const int k = dict.k();
    r.gradients.assign(k, Eigen::MatrixXd::Zero(dict.m(), dict.m()));
    if (k < 2) return r;
    const double npairs = 0.5 * k * (k - 1);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const Eigen::MatrixXd diff = dict.bases[i] - dict.bases[j];
            const double dist = diff.norm();
            const double hinge = dict.margin - dist;
            if (hinge <= 0.0) continue;
            r.loss += hinge / npairs;
            if (dist > 0.0) {
                const Eigen::MatrixXd dir = diff / (dist * npairs);
                r.gradients[i] -= dir;
                r.gradients[j] += dir;
            }
        }
    return r;
}

}  // namespace scgfm
