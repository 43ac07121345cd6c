#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scgfm/errors.hpp"
#include "scgfm/graph.hpp"
#include "scgfm/ot.hpp"
#include "scgfm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace scgfm;

namespace {

// quartic-loop objective: the definition the factorized path must reproduce
double quartic_cost(const MmSpace& a, const MmSpace& b, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd sa = a.dense_structure();
    const Eigen::MatrixXd sb = b.dense_structure();
    double e = 0.0;
    for (int i = 0; i < sa.rows(); ++i)
        for (int j = 0; j < sb.rows(); ++j)
            for (int k = 0; k < sa.rows(); ++k)
                for (int l = 0; l < sb.rows(); ++l) {
                    const double d = sa(i, k) - sb(j, l);
                    e += d * d * t(i, j) * t(k, l);
                }
    return e;
}

MmSpace random_uniform_space(int n, double p, std::uint64_t seed) {
    Graph g = generate_er(n, p, seed);
    Eigen::MatrixXd adj = g.dense_adjacency();
    return mm_uniform(adj);
}

MmSpace random_weighted_space(int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) s(i, j) = s(j, i) = rng.uniform01();
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) mu[i] = 0.2 + rng.uniform01();
    mu /= mu.sum();
    return mm_from_dense(s, mu);
}

MmSpace permute_space(const MmSpace& s, const std::vector<int>& perm) {
    const int n = s.size();
    Eigen::MatrixXd st = s.dense_structure();
    Eigen::MatrixXd pst(n, n);
    Eigen::VectorXd pmu(n);
    for (int i = 0; i < n; ++i) {
        pmu[perm[i]] = s.measure[i];
        for (int j = 0; j < n; ++j) pst(perm[i], perm[j]) = st(i, j);
    }
    return mm_from_dense(pst, pmu);
}

MmSpace triangle_space() {
    Eigen::MatrixXd k3 = Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3);
    return mm_uniform(k3);
}

MmSpace path3_space() {
    Eigen::MatrixXd p3 = Eigen::MatrixXd::Zero(3, 3);
    p3(0, 1) = p3(1, 0) = p3(1, 2) = p3(2, 1) = 1.0;
    return mm_uniform(p3);
}

}  // namespace

// ============================================================
// objective and gradient
// ============================================================

TEST_CASE("factorized objective equals the quartic loop") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        MmSpace a = random_weighted_space(4 + trial % 3, derive_seed(31, 2 * trial));
        MmSpace b = random_weighted_space(3 + trial % 4, derive_seed(31, 2 * trial + 1));
        Coupling t;
        t.plan = a.measure * b.measure.transpose();  // product plan is always feasible
        t.row_marginal = a.measure;
        t.col_marginal = b.measure;
        const double fast = gw_cost_at(a, b, t);
        const double slow = quartic_cost(a, b, t.plan);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
        CHECK(fast >= 0.0);
    }
}

TEST_CASE("structure gradient matches central differences at a fixed plan") {
    MmSpace a = random_weighted_space(5, 101);
    MmSpace b = random_weighted_space(4, 102);
    Coupling t;
    t.plan = a.measure * b.measure.transpose();
    t.row_marginal = a.measure;
    t.col_marginal = b.measure;

    const Eigen::MatrixXd grad = gw_gradient_b(a, b, t);
    CHECK((grad - grad.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(grad.diagonal().cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd sb = b.dense_structure();
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j)
        for (int l = j + 1; l < 4; ++l) {
            // perturb the symmetric pair together, so the directional
            // derivative is grad(j,l) + grad(l,j)
            Eigen::MatrixXd plus = sb, minus = sb;
            plus(j, l) += h;
            plus(l, j) += h;
            minus(j, l) -= h;
            minus(l, j) -= h;
            const double fp = gw_cost_at(a, mm_from_dense(plus, b.measure), t);
            const double fm = gw_cost_at(a, mm_from_dense(minus, b.measure), t);
            const double fd = (fp - fm) / (2.0 * h);
            CHECK(fd == doctest::Approx(grad(j, l) + grad(l, j)).epsilon(1e-6));
        }
}

// ============================================================
// exact solver
// ============================================================

TEST_CASE("triangle versus path has discrepancy 2/9") {
    GwResult r = exact_gw(triangle_space(), path3_space());
    CHECK(r.cost == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
    CHECK_NOTHROW(r.coupling.validate(1e-9));
}

TEST_CASE("exact solver finds zero on isomorphic inputs") {
    Rng rng(55);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 4 + trial % 4;
        MmSpace a = random_uniform_space(n, 0.5, derive_seed(55, trial));
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        MmSpace b = permute_space(a, perm);
        CHECK(exact_gw(a, b).cost == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("exact solver cost is a permutation lower bound") {
    // any single permutation plan evaluated by the factorized objective can
    // never beat the enumerated optimum
    MmSpace a = random_uniform_space(5, 0.5, 7);
    MmSpace b = random_uniform_space(5, 0.4, 8);
    GwResult r = exact_gw(a, b);
    CHECK(r.cost == doctest::Approx(gw_cost_at(a, b, r.coupling)).epsilon(1e-10));

    Rng rng(9);
    std::vector<int> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 20; ++trial) {
        rng.shuffle(perm);
        Coupling t;
        t.plan = Eigen::MatrixXd::Zero(5, 5);
        for (int i = 0; i < 5; ++i) t.plan(i, perm[i]) = 0.2;
        t.row_marginal = a.measure;
        t.col_marginal = b.measure;
        CHECK(gw_cost_at(a, b, t) >= r.cost - 1e-12);
    }
}

TEST_CASE("exact solver rejects out-of-contract instances") {
    CHECK_THROWS_AS(exact_gw(random_uniform_space(9, 0.5, 1), random_uniform_space(9, 0.5, 2)),
                    unsupported_error);
    CHECK_THROWS_AS(exact_gw(random_uniform_space(4, 0.5, 1), random_uniform_space(5, 0.5, 2)),
                    unsupported_error);
    CHECK_THROWS_AS(exact_gw(random_weighted_space(4, 3), random_weighted_space(4, 4)),
                    unsupported_error);
}

// ============================================================
// entropic solver
// ============================================================

TEST_CASE("entropic solver tracks the enumerated optimum on small pairs") {
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 3 + trial % 4;  // 3..6
        MmSpace a = random_uniform_space(n, 0.45, derive_seed(700, 2 * trial));
        MmSpace b = random_uniform_space(n, 0.55, derive_seed(700, 2 * trial + 1));
        const double exact = exact_gw(a, b).cost;
        GwResult ent = entropic_gw(a, b, 1e-3);
        CHECK(ent.cost >= -1e-12);
        worst = std::max(worst, std::abs(ent.cost - exact));
    }
    CHECK(worst < 0.05);
}

TEST_CASE("entropic self-distance is numerically zero") {
    for (int trial = 0; trial < 5; ++trial) {
        MmSpace a = random_uniform_space(6 + trial, 0.4, derive_seed(81, trial));
        CHECK(entropic_gw(a, a).cost < 1e-3);
        MmSpace w = random_weighted_space(5 + trial, derive_seed(82, trial));
        CHECK(entropic_gw(w, w).cost < 1e-3);
    }
}

TEST_CASE("entropic solver is symmetric in its arguments") {
    MmSpace a = random_uniform_space(7, 0.4, 21);
    MmSpace b = random_weighted_space(6, 22);
    GwResult ab = entropic_gw(a, b);
    GwResult ba = entropic_gw(b, a);
    CHECK(std::abs(ab.cost - ba.cost) < 1e-12);
    CHECK((ab.coupling.plan - ba.coupling.plan.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("entropic solver is invariant under node relabeling") {
    Rng rng(300);
    MmSpace a = random_uniform_space(7, 0.45, 301);
    MmSpace b = random_weighted_space(6, 302);
    const double base = entropic_gw(a, b).cost;
    for (int trial = 0; trial < 4; ++trial) {
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        CHECK(std::abs(entropic_gw(a, permute_space(b, perm)).cost - base) < 1e-12);
    }
}

TEST_CASE("entropic plans satisfy the marginal constraints") {
    MmSpace a = random_weighted_space(8, 401);
    MmSpace b = random_weighted_space(5, 402);
    GwResult r = entropic_gw(a, b);
    CHECK_NOTHROW(r.coupling.validate(1e-6));
    CHECK((r.coupling.plan.rowwise().sum() - a.measure).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.coupling.plan.colwise().sum().transpose() - b.measure).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.coupling.plan.minCoeff() >= 0.0);
}

// ============================================================
// one-dimensional solver
// ============================================================

TEST_CASE("two points against a stretched pair costs one half") {
    Weighted1d x, y;
    x.pos = Eigen::VectorXd(2);
    x.pos << 0.0, 1.0;
    x.w = Eigen::VectorXd::Constant(2, 0.5);
    y.pos = Eigen::VectorXd(2);
    y.pos << 0.0, 2.0;
    y.w = Eigen::VectorXd::Constant(2, 0.5);
    Gw1dResult r = gw_1d(x, y);
    CHECK(r.cost == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("identical point sets cost zero") {
    Rng rng(500);
    Weighted1d x;
    x.pos = Eigen::VectorXd(5);
    x.pos << -1.0, 0.0, 0.5, 2.0, 3.5;
    x.w = Eigen::VectorXd::Constant(5, 0.2);
    CHECK(gw_1d(x, x).cost == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("staircase plans carry exact marginals") {
    Rng rng(501);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + trial % 5, m = 2 + (trial + 2) % 5;
        Weighted1d x, y;
        x.pos = Eigen::VectorXd(n);
        y.pos = Eigen::VectorXd(m);
        x.w = Eigen::VectorXd(n);
        y.w = Eigen::VectorXd(m);
        for (int i = 0; i < n; ++i) {
            x.pos[i] = rng.normal();
            x.w[i] = 0.1 + rng.uniform01();
        }
        for (int j = 0; j < m; ++j) {
            y.pos[j] = rng.normal();
            y.w[j] = 0.1 + rng.uniform01();
        }
        std::sort(x.pos.data(), x.pos.data() + n);
        std::sort(y.pos.data(), y.pos.data() + m);
        x.w /= x.w.sum();
        y.w /= y.w.sum();

        Gw1dResult r = gw_1d(x, y);
        Eigen::VectorXd rs = Eigen::VectorXd::Zero(n), cs = Eigen::VectorXd::Zero(m);
        for (const auto& [i, j, w] : r.plan) {
            CHECK(w >= 0.0);
            rs[i] += w;
            cs[j] += w;
        }
        CHECK((rs - x.w).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((cs - y.w).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("monotone or reversed matching is permutation optimal") {
    // for equal sizes and uniform weights the optimal permutation under the
    // signed pairwise-difference objective is either the sorted order or its
    // reversal; verify against full enumeration
    Rng rng(502);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + trial % 5;  // 2..6
        Weighted1d x, y;
        x.pos = Eigen::VectorXd(n);
        y.pos = Eigen::VectorXd(n);
        for (int i = 0; i < n; ++i) {
            x.pos[i] = 3.0 * rng.normal();
            y.pos[i] = 3.0 * rng.normal();
        }
        std::sort(x.pos.data(), x.pos.data() + n);
        std::sort(y.pos.data(), y.pos.data() + n);
        x.w = Eigen::VectorXd::Constant(n, 1.0 / n);
        y.w = x.w;

        std::vector<int> pi(n);
        std::iota(pi.begin(), pi.end(), 0);
        double best = 1e300;
        do {
            double c = 0.0;
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    const double d = (x.pos[i] - x.pos[k]) - (y.pos[pi[i]] - y.pos[pi[k]]);
                    c += d * d;
                }
            best = std::min(best, c / (static_cast<double>(n) * n));
        } while (std::next_permutation(pi.begin(), pi.end()));

        CHECK(gw_1d(x, y).cost == doctest::Approx(best).epsilon(1e-9));
    }
}

// ============================================================
// spectral lift and slices
// ============================================================

TEST_CASE("slice directions are unit rows and seed-deterministic") {
    SliceSet s1 = make_slices(50, 8, 1234);
    SliceSet s2 = make_slices(50, 8, 1234);
    SliceSet s3 = make_slices(50, 8, 1235);
    CHECK(s1.count() == 50);
    CHECK(s1.dim() == 8);
    CHECK((s1.directions - s2.directions).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1.directions - s3.directions).cwiseAbs().maxCoeff() > 1e-3);
    for (int l = 0; l < s1.count(); ++l)
        CHECK(s1.directions.row(l).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spectral coordinates reproduce the dominant eigenvalues") {
    MmSpace a = random_uniform_space(12, 0.4, 600);
    const int d = 6;
    Eigen::MatrixXd x = spectral_embed(a, d);
    REQUIRE(x.rows() == 12);
    REQUIRE(x.cols() == d);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.dense_structure());
    std::vector<double> mags(es.eigenvalues().data(), es.eigenvalues().data() + 12);
    for (double& v : mags) v = std::abs(v);
    std::sort(mags.rbegin(), mags.rend());
    for (int j = 0; j < d; ++j)
        CHECK(x.col(j).squaredNorm() == doctest::Approx(mags[j]).epsilon(1e-9));
}

TEST_CASE("spectral coordinates are equivariant under relabeling") {
    Rng rng(601);
    MmSpace a = random_weighted_space(10, 602);  // generic weights: simple spectrum
    std::vector<int> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    MmSpace b = permute_space(a, perm);

    Eigen::MatrixXd xa = spectral_embed(a, 4);
    Eigen::MatrixXd xb = spectral_embed(b, 4);
    for (int i = 0; i < 10; ++i)
        CHECK((xa.row(i) - xb.row(perm[i])).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank-deficient structures zero-pad the trailing columns") {
    // star K_{1,3}: adjacency rank 2, so asking for 4 columns pads two
    Eigen::MatrixXd star = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 1; i < 4; ++i) star(0, i) = star(i, 0) = 1.0;
    Eigen::MatrixXd x = spectral_embed(mm_uniform(star), 4);
    CHECK(x.col(2).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(x.col(3).cwiseAbs().maxCoeff() < 1e-9);
}

// ============================================================
// sliced solver
// ============================================================

TEST_CASE("sliced discrepancy vanishes on identical spaces") {
    SliceSet slices = make_slices(50, 8, 777);
    for (int trial = 0; trial < 5; ++trial) {
        MmSpace a = random_uniform_space(15 + 5 * trial, 0.3, derive_seed(700, trial));
        CHECK(sliced_gw(a, a, slices).cost < 1e-9);
    }
}

TEST_CASE("sliced coupling is feasible and matches the cost-only path") {
    SliceSet slices = make_slices(50, 8, 778);
    MmSpace a = random_uniform_space(20, 0.3, 801);
    MmSpace b = random_uniform_space(14, 0.4, 802);

    GwResult r = sliced_gw(a, b, slices);
    CHECK(r.cost >= 0.0);
    CHECK_NOTHROW(r.coupling.validate(1e-8));
    CHECK((r.coupling.plan.rowwise().sum() - a.measure).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.coupling.plan.colwise().sum().transpose() - b.measure).cwiseAbs().maxCoeff() < 1e-9);

    CHECK(sliced_gw_cost(a, b, slices) == doctest::Approx(r.cost).epsilon(1e-12));

    GwResult again = sliced_gw(a, b, slices);
    CHECK(again.cost == r.cost);
    CHECK((again.coupling.plan - r.coupling.plan).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sliced discrepancy is symmetric") {
    SliceSet slices = make_slices(50, 8, 779);
    MmSpace a = random_uniform_space(18, 0.3, 803);
    MmSpace b = random_uniform_space(12, 0.4, 804);
    CHECK(sliced_gw_cost(a, b, slices) == doctest::Approx(sliced_gw_cost(b, a, slices)).epsilon(1e-12));
}

// ============================================================
// coupling checks
// ============================================================

TEST_CASE("coupling validation flags infeasible plans") {
    Coupling c;
    c.plan = Eigen::MatrixXd::Constant(2, 2, 0.25);
    c.row_marginal = Eigen::VectorXd::Constant(2, 0.5);
    c.col_marginal = Eigen::VectorXd::Constant(2, 0.5);
    CHECK_NOTHROW(c.validate(1e-9));

    Coupling neg = c;
    neg.plan(0, 0) = -0.1;
    CHECK_THROWS_AS(neg.validate(1e-9), integrity_error);

    Coupling off = c;
    off.plan(0, 0) = 0.4;
    CHECK_THROWS_AS(off.validate(1e-6), integrity_error);
}
