#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scgfm/bases.hpp"
#include "scgfm/errors.hpp"
#include "scgfm/graph.hpp"
#include "scgfm/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

using namespace scgfm;

namespace {

MmSpace uniform_er_space(int n, double p, std::uint64_t seed) {
    return mm_uniform(generate_er(n, p, seed).dense_adjacency());
}

}  // namespace

// ============================================================
// dictionary initialization and constraints
// ============================================================

TEST_CASE("initial dictionary satisfies every base constraint") {
    BaseDictionary d = init_dictionary(6, 12, 42);
    REQUIRE(d.k() == 6);
    REQUIRE(d.m() == 12);
    CHECK_NOTHROW(d.validate());
    CHECK(d.base_measure.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& b : d.bases) {
        CHECK((b - b.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(b.diagonal().cwiseAbs().maxCoeff() == 0.0);
        CHECK(b.minCoeff() >= 0.0);
        CHECK(b.maxCoeff() <= 1.0);
    }

    BaseDictionary d2 = init_dictionary(6, 12, 42);
    for (int k = 0; k < 6; ++k)
        CHECK((d.bases[k] - d2.bases[k]).cwiseAbs().maxCoeff() == 0.0);
    BaseDictionary d3 = init_dictionary(6, 12, 43);
    CHECK((d.bases[0] - d3.bases[0]).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("constraint projection symmetrizes, clips and zeroes the diagonal") {
    Eigen::MatrixXd raw(3, 3);
    raw << 5.0, 0.2, -1.0,  //
        0.6, -2.0, 1.4,     //
        0.3, 0.8, 0.9;
    Eigen::MatrixXd p = project_constraints(raw);

    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
    // asymmetric 0.2 / 0.6 pair averages to 0.4 before clipping
    CHECK(p(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
    // -1.0 / 0.3 averages to -0.35, clipped at zero
    CHECK(p(0, 2) == 0.0);
    // 1.4 / 0.8 averages to 1.1, clipped at one: clip after the average
    CHECK(p(1, 2) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK((project_constraints(p) - p).cwiseAbs().maxCoeff() == 0.0);  // idempotent
}

TEST_CASE("dictionary validation flags broken bases") {
    BaseDictionary d = init_dictionary(2, 4, 1);
    d.bases[0](1, 2) = 1.5;
    CHECK_THROWS_AS(d.validate(), integrity_error);
    d = init_dictionary(2, 4, 1);
    d.bases[1](0, 0) = 0.3;
    CHECK_THROWS_AS(d.validate(), integrity_error);
    d = init_dictionary(2, 4, 1);
    d.bases[0](0, 1) += 0.1;  // breaks symmetry
    CHECK_THROWS_AS(d.validate(), integrity_error);
}

// ============================================================
// softmax coordinates
// ============================================================

TEST_CASE("softmax basics") {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd s = softmax(z);
    for (int i = 0; i < 4; ++i) CHECK(s[i] == doctest::Approx(0.25).epsilon(1e-15));

    Eigen::VectorXd x(3);
    x << 1.0, 2.0, 3.0;
    Eigen::VectorXd sx = softmax(x);
    CHECK(sx.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(sx[2] > sx[1]);
    CHECK(sx[1] > sx[0]);
    // shift invariance
    Eigen::VectorXd shifted = softmax((x.array() + 100.0).matrix());
    CHECK((sx - shifted).cwiseAbs().maxCoeff() < 1e-15);
    // no overflow for large magnitudes
    Eigen::VectorXd big(2);
    big << 1000.0, 1001.0;
    Eigen::VectorXd sb = softmax(big);
    CHECK(std::isfinite(sb[0]));
    CHECK(sb.sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("structural coordinates form a simplex consistent with the costs") {
    BaseDictionary dict = init_dictionary(4, 8, 7);
    dict.temperature = 0.3;
    GwSolver solver = GwSolver::make(GwSolver::entropic, 0.01);
    MmSpace g = uniform_er_space(10, 0.4, 70);

    CoordinateResult c = structural_coordinates(g, dict, solver);
    REQUIRE(c.weights.size() == 4);
    REQUIRE(c.deltas.size() == 4);
    REQUIRE(c.couplings.size() == 4);

    CHECK(c.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.weights.minCoeff() > 0.0);
    CHECK(c.deltas.minCoeff() >= 0.0);

    // the weights must be exactly the softmax of the scaled negative costs
    Eigen::VectorXd expect = softmax((-c.deltas / dict.temperature));
    CHECK((c.weights - expect).cwiseAbs().maxCoeff() < 1e-14);

    // each coupling is feasible between the graph and its base
    for (int k = 0; k < 4; ++k) {
        CHECK_NOTHROW(c.couplings[k].validate(1e-6));
        CHECK(c.couplings[k].plan.rows() == g.size());
        CHECK(c.couplings[k].plan.cols() == dict.m());
    }
}

TEST_CASE("a base matching the graph dominates the coordinates") {
    // dictionary of two bases: one is the graph's own structure, the other is
    // a near-complete block; the matching base must take most of the weight
    MmSpace g = uniform_er_space(8, 0.35, 71);
    BaseDictionary dict;
    dict.bases.push_back(g.dense_structure());
    dict.bases.push_back(project_constraints(Eigen::MatrixXd::Constant(8, 8, 0.95)));
    dict.base_measure = Eigen::VectorXd::Constant(8, 1.0 / 8.0);
    dict.temperature = 0.1;
    CHECK_NOTHROW(dict.validate());

    GwSolver solver = GwSolver::make(GwSolver::entropic, 0.005);
    CoordinateResult c = structural_coordinates(g, dict, solver);
    CHECK(c.deltas[0] < 1e-3);
    CHECK(c.deltas[1] > c.deltas[0]);
    CHECK(c.weights[0] > 0.9);
}

TEST_CASE("coordinate shifts are bounded by the scaled input discrepancy") {
    // smooth dependence of the softmax coordinates: the coordinate distance
    // between two graphs stays below sqrt(K) / tau times their enumerated
    // discrepancy; everything here is solved exactly, no solver slack
    const int kBases = 4;
    for (double tau : {0.3, 1.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 4 + trial % 3;  // 4..6
            MmSpace a = uniform_er_space(n, 0.5, derive_seed(900, 2 * trial));
            MmSpace b = uniform_er_space(n, 0.5, derive_seed(900, 2 * trial + 1));
            BaseDictionary dict = init_dictionary(kBases, n, derive_seed(901, trial));
            dict.temperature = tau;

            Eigen::VectorXd da(kBases), db(kBases);
            for (int k = 0; k < kBases; ++k) {
                MmSpace bs = dict.base_space(k);
                da[k] = exact_gw(a, bs).cost;
                db[k] = exact_gw(b, bs).cost;
            }
            const double lhs = (softmax(-da / tau) - softmax(-db / tau)).norm();
            const double rhs =
                std::sqrt(static_cast<double>(kBases)) / tau * exact_gw(a, b).cost;
            CHECK(lhs <= rhs + 1e-9);
        }
    }
}

// ============================================================
// surrogate and diversity
// ============================================================

TEST_CASE("linear surrogate reproduces corners and averages") {
    BaseDictionary dict = init_dictionary(3, 6, 23);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
    e1[1] = 1.0;
    CHECK((linear_surrogate(dict, e1) - dict.bases[1]).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
    Eigen::MatrixXd mix = linear_surrogate(dict, w);
    Eigen::MatrixXd mean = (dict.bases[0] + dict.bases[1] + dict.bases[2]) / 3.0;
    CHECK((mix - mean).cwiseAbs().maxCoeff() < 1e-15);

    // convexity keeps the base constraints without reprojection
    CHECK((mix - mix.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(mix.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(mix.minCoeff() >= 0.0);
    CHECK(mix.maxCoeff() <= 1.0);
}

TEST_CASE("diversity hinge activates only below the margin") {
    BaseDictionary dict = init_dictionary(3, 8, 31);
    dict.margin = 1e-6;  // everything is farther apart than this
    DiversityResult far = diversity_loss(dict);
    CHECK(far.loss == 0.0);
    for (const auto& g : far.gradients) CHECK(g.cwiseAbs().maxCoeff() == 0.0);

    dict.margin = 10.0;
    DiversityResult close = diversity_loss(dict);
    CHECK(close.loss > 0.0);

    // duplicated bases sit at distance zero: hinge = margin on that pair,
    // with a zero (sub)gradient there
    BaseDictionary dup = init_dictionary(2, 8, 32);
    dup.bases[1] = dup.bases[0];
    dup.margin = 2.0;
    DiversityResult r = diversity_loss(dup);
    CHECK(r.loss == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.gradients[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("diversity gradients match central differences") {
    BaseDictionary dict = init_dictionary(3, 5, 33);
    dict.margin = 10.0;
    DiversityResult r = diversity_loss(dict);

    const double h = 1e-6;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                BaseDictionary plus = dict, minus = dict;
                plus.bases[k](i, j) += h;
                plus.bases[k](j, i) += h;
                minus.bases[k](i, j) -= h;
                minus.bases[k](j, i) -= h;
                const double fd =
                    (diversity_loss(plus).loss - diversity_loss(minus).loss) / (2.0 * h);
                const double an = r.gradients[k](i, j) + r.gradients[k](j, i);
                CHECK(fd == doctest::Approx(an).epsilon(1e-5));
            }
}

// ============================================================
// solver dispatch
// ============================================================

TEST_CASE("solver wrapper dispatches to consistent backends") {
    MmSpace a = uniform_er_space(6, 0.5, 41);
    MmSpace b = uniform_er_space(6, 0.5, 42);

    GwSolver ex = GwSolver::make(GwSolver::exact);
    GwSolver en = GwSolver::make(GwSolver::entropic, 1e-3);
    const double cx = ex.solve(a, b).cost;
    const double cn = en.solve(a, b).cost;
    CHECK(std::abs(cx - cn) < 0.05);

    auto slices = std::make_shared<SliceSet>(make_slices(50, 8, 99));
    GwSolver sl = GwSolver::make(GwSolver::sliced, 0.01, slices);
    GwResult rs = sl.solve(a, b);
    CHECK(rs.cost >= 0.0);
    CHECK_NOTHROW(rs.coupling.validate(1e-8));

    GwSolver missing = GwSolver::make(GwSolver::sliced);
    CHECK_THROWS_AS(missing.solve(a, b), integrity_error);
}
