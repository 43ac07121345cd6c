#include "scgfm/ot.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace scgfm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ============================================================ Coupling

void Coupling::validate(double tol) const {
    if (plan.rows() != row_marginal.size() || plan.cols() != col_marginal.size())
        throw integrity_error("coupling shape mismatch");
    if ((plan.array() < -1e-12).any()) throw integrity_error("negative coupling entry");
    const Eigen::VectorXd rs = plan.rowwise().sum();
    const Eigen::VectorXd cs = plan.colwise().sum().transpose();
    if ((rs - row_marginal).cwiseAbs().maxCoeff() > tol ||
        (cs - col_marginal).cwiseAbs().maxCoeff() > tol)
        throw integrity_error("coupling marginals out of tolerance");
}

// ============================================================ slices

SliceSet make_slices(int l, int d, std::uint64_t seed) {
    if (l < 1 || d < 1) throw integrity_error("slice count and dimension must be >= 1");
    Rng rng(seed);
    SliceSet s;
    s.seed = seed;
    s.directions.resize(l, d);
    for (int i = 0; i < l; ++i) {
        double norm = 0.0;
        while (norm < 1e-12) {
            for (int j = 0; j < d; ++j) s.directions(i, j) = rng.normal();
            norm = s.directions.row(i).norm();
        }
        s.directions.row(i) /= norm;
    }
    return s;
}

// ============================================================ shared helpers

namespace {

void check_measure(const Eigen::VectorXd& mu, const char* who) {
    if (mu.size() == 0) throw integrity_error(std::string(who) + ": empty measure");
    if ((mu.array() < -1e-12).any()) throw integrity_error(std::string(who) + ": negative mass");
    if (std::abs(mu.sum() - 1.0) > 1e-6) throw integrity_error(std::string(who) + ": mass not 1");
}

// quadratic-objective bilinear form Q(S,T); Q(T,T) is the GW objective
double q_form(const Eigen::MatrixXd& a2, const Eigen::MatrixXd& b2, const Eigen::MatrixXd& ab_t,
              const Eigen::MatrixXd& s, const Eigen::MatrixXd& t) {
    const Eigen::VectorXd ps = s.rowwise().sum(), pt = t.rowwise().sum();
    const Eigen::VectorXd qs = s.colwise().sum().transpose(), qt = t.colwise().sum().transpose();
    return ps.dot(a2 * pt) + qs.dot(b2 * qt) - 2.0 * (s.array() * ab_t.array()).sum();
}

double objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& a2,
                 const Eigen::MatrixXd& b2, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd abt = a * t * b;
    return q_form(a2, b2, abt, t, t);
}

double logsumexp_row(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

// log-domain Sinkhorn for cost M at regularization e; warm-started potentials
void sinkhorn_log(const Eigen::MatrixXd& m, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                  double e, double tol, int max_inner, Eigen::VectorXd& f, Eigen::VectorXd& g,
                  Eigen::MatrixXd& t_out) {
    const int n = static_cast<int>(p.size());
    const int mm = static_cast<int>(q.size());
    const Eigen::VectorXd lp = p.array().max(1e-300).log();
    const Eigen::VectorXd lq = q.array().max(1e-300).log();
    for (int it = 0; it < max_inner; ++it) {
        for (int i = 0; i < n; ++i)
            f[i] = e * lp[i] - e * logsumexp_row((g - m.row(i).transpose()) / e);
        for (int j = 0; j < mm; ++j)
            g[j] = e * lq[j] - e * logsumexp_row((f - m.col(j)) / e);
        t_out = (((f.replicate(1, mm) + g.transpose().replicate(n, 1) - m) / e).array().exp()).matrix();
        const double err = std::max((t_out.rowwise().sum() - p).cwiseAbs().maxCoeff(),
                                    (t_out.colwise().sum().transpose() - q).cwiseAbs().maxCoeff());
        if (err < tol) break;
    }
}

// fixed, index-based perturbation pattern in [-1, 1]; used only to leave the
// product-plan fixed point on structurally symmetric instances
double fixed_pattern(int i, int j) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(i) * 2654435761ULL) ^
                      (static_cast<std::uint64_t>(j) * 40503ULL + 12345ULL);
    h ^= h >> 13;
    h *= 1274126177ULL;
    h ^= h >> 31;
    return (static_cast<double>(h & 0xFFFFFFFFULL) / 4294967295.0) * 2.0 - 1.0;
}

void repair_marginals(Eigen::MatrixXd& t, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                      int iters = 50) {
    for (int s = 0; s < iters; ++s) {
        const Eigen::VectorXd rs = t.rowwise().sum().cwiseMax(1e-300);
        t.array().colwise() *= (p.array() / rs.array());
        const Eigen::VectorXd cs = t.colwise().sum().transpose().cwiseMax(1e-300);
        t.array().rowwise() *= (q.array() / cs.array()).transpose();
        if ((t.rowwise().sum() - p).cwiseAbs().maxCoeff() < 1e-13) break;
    }
    // exact finish: scale overfull rows/columns down, then close the remaining
    // deficit with a rank-one nonnegative correction
    for (int i = 0; i < t.rows(); ++i) {
        const double s = t.row(i).sum();
        if (s > p[i] && s > 0.0) t.row(i) *= p[i] / s;
    }
    for (int j = 0; j < t.cols(); ++j) {
        const double s = t.col(j).sum();
        if (s > q[j] && s > 0.0) t.col(j) *= q[j] / s;
    }
    const Eigen::VectorXd er = (p - t.rowwise().sum()).cwiseMax(0.0);
    const Eigen::VectorXd ec = (q - t.colwise().sum().transpose()).cwiseMax(0.0);
    const double se = er.sum();
    if (se > 1e-300) t += er * (ec.transpose() / se);
}

// ---------- canonical node order (pure function of structure + measure) ----

// Color refinement with exact multiset keys plus greedy individualization.
// The resulting order depends only on the weighted-graph structure, not on
// the input labeling: refinement keys are sorted multisets (bit-exact under
// relabeling), and when a color class stays ambiguous the candidate whose
// completed canonical matrix is lexicographically smallest is individualized.
// Candidates that remain tied after that are interchangeable (automorphic or
// indistinguishable at this depth), so the produced matrix is the same.
struct Canonizer {
    const Eigen::MatrixXd& s;
    const Eigen::VectorXd& mu;
    int n;

    Canonizer(const Eigen::MatrixXd& s_, const Eigen::VectorXd& mu_)
        : s(s_), mu(mu_), n(static_cast<int>(mu_.size())) {}

    static int rank_colors(const std::vector<std::vector<double>>& key, std::vector<int>& col) {
        const int n = static_cast<int>(key.size());
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return key[x] < key[y]; });
        int c = 0;
        col[idx[0]] = 0;
        for (int r = 1; r < n; ++r) {
            if (key[idx[r]] != key[idx[r - 1]]) ++c;
            col[idx[r]] = c;
        }
        return c + 1;
    }

    std::vector<int> initial() const {
        std::vector<std::vector<double>> key(n);
        for (int i = 0; i < n; ++i) {
            key[i].reserve(n + 1);
            key[i].push_back(mu[i]);
            for (int j = 0; j < n; ++j)
                if (j != i) key[i].push_back(s(i, j));
            std::sort(key[i].begin() + 1, key[i].end());
        }
        std::vector<int> col(n);
        rank_colors(key, col);
        return col;
    }

    // split classes by the multiset of (neighbor color, edge value) until stable
    void refine(std::vector<int>& col) const {
        int classes = *std::max_element(col.begin(), col.end()) + 1;
        while (classes < n) {
            std::vector<std::vector<double>> key(n);
            std::vector<std::pair<double, double>> neigh;
            for (int i = 0; i < n; ++i) {
                neigh.clear();
                for (int j = 0; j < n; ++j)
                    if (j != i && s(i, j) != 0.0) neigh.emplace_back(col[j], s(i, j));
                std::sort(neigh.begin(), neigh.end());
                key[i].reserve(2 * neigh.size() + 1);
                key[i].push_back(col[i]);
                for (const auto& [c, v] : neigh) {
                    key[i].push_back(c);
                    key[i].push_back(v);
                }
            }
            const int next = rank_colors(key, col);
            if (next == classes) return;
            classes = next;
        }
    }

    static void individualize(std::vector<int>& col, int v) {
        const int c = col[v];
        for (int u = 0; u < static_cast<int>(col.size()); ++u)
            if (col[u] > c || (col[u] == c && u != v)) ++col[u];
    }

    int first_tied_class(const std::vector<int>& col) const {
        std::vector<int> count(n, 0);
        for (int i = 0; i < n; ++i) ++count[col[i]];
        int target = -1;
        for (int c = 0; c < n; ++c)
            if (count[c] > 1) {
                target = c;
                break;
            }
        return target;
    }

    // finish a coloring by always individualizing the first member; returns
    // the node order (position -> node) of the resulting discrete coloring
    std::vector<int> complete_first(std::vector<int> col) const {
        while (true) {
            refine(col);
            const int cls = first_tied_class(col);
            if (cls < 0) break;
            for (int v = 0; v < n; ++v)
                if (col[v] == cls) {
                    individualize(col, v);
                    break;
                }
        }
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[col[i]] = i;
        return order;
    }

    // flattened canonical matrix + measure for lexicographic comparison
    std::vector<double> signature(const std::vector<int>& order) const {
        std::vector<double> sig;
        sig.reserve(n * (n + 1));
        for (int r = 0; r < n; ++r) sig.push_back(mu[order[r]]);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) sig.push_back(s(order[r], order[c]));
        return sig;
    }

    std::vector<int> run() const {
        std::vector<int> col = initial();
        while (true) {
            refine(col);
            const int cls = first_tied_class(col);
            if (cls < 0) break;
            std::vector<int> members;
            for (int v = 0; v < n; ++v)
                if (col[v] == cls) members.push_back(v);
            int pick = members[0];
            if (static_cast<int>(members.size()) <= 12) {
                std::vector<double> best_sig;
                for (const int v : members) {
                    std::vector<int> cv = col;
                    individualize(cv, v);
                    const auto sig = signature(complete_first(std::move(cv)));
                    if (best_sig.empty() || sig < best_sig) {
                        best_sig = sig;
                        pick = v;
                    }
                }
            }
            individualize(col, pick);
        }
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[col[i]] = i;
        return order;
    }
};

std::vector<int> canonical_order(const Eigen::MatrixXd& s, const Eigen::VectorXd& mu) {
    return Canonizer(s, mu).run();
}

// total order on spaces deciding the solve orientation; built from invariant
// (sorted) summaries so it is independent of node labeling
int compare_spaces(const Eigen::MatrixXd& sa, const Eigen::VectorXd& pa,
                   const Eigen::MatrixXd& sb, const Eigen::VectorXd& pb) {
    if (pa.size() != pb.size()) return pa.size() < pb.size() ? -1 : 1;
    auto sorted_vec = [](const Eigen::VectorXd& v) {
        std::vector<double> out(v.data(), v.data() + v.size());
        std::sort(out.begin(), out.end());
        return out;
    };
    const auto ma = sorted_vec(pa), mb = sorted_vec(pb);
    if (ma != mb) return ma < mb ? -1 : 1;
    const auto ra = sorted_vec(sa.rowwise().sum()), rb = sorted_vec(sb.rowwise().sum());
    if (ra != rb) return ra < rb ? -1 : 1;
    std::vector<double> fa(sa.data(), sa.data() + sa.size());
    std::vector<double> fb(sb.data(), sb.data() + sb.size());
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    if (fa != fb) return fa < fb ? -1 : 1;
    return 0;
}

// ---------- vertex rounding + local search ------------------------------

// Hungarian algorithm (shortest augmenting paths, O(n^3)); cost may contain
// +inf for forbidden cells as long as a finite perfect matching exists.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(n);
    for (int j = 1; j <= n; ++j)
        if (p[j]) match[p[j] - 1] = j - 1;
    return match;
}

// cost of the vertex plan T_ij = p_i [pi(i) = j]
double perm_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& p,
                 const std::vector<int>& pi) {
    const int n = static_cast<int>(pi.size());
    double c = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const double d = a(i, k) - b(pi[i], pi[k]);
            c += d * d * p[i] * p[k];
        }
    return c;
}

// steepest-descent local search over mass-preserving 2-swaps and (for small
// instances) 3-rotations; `group` marks interchangeable rows (equal mass)
void local_search(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& p,
                  const std::vector<int>& group, std::vector<int>& pi, double& cost) {
    const int n = static_cast<int>(pi.size());
    const bool use3 = n <= 20;
    bool improved = true;
    while (improved) {
        improved = false;
        double best = cost;
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (group[i] != group[j]) continue;
                std::swap(pi[i], pi[j]);
                const double c = perm_cost(a, b, p, pi);
                std::swap(pi[i], pi[j]);
                if (c < best - 1e-15) {
                    best = c;
                    bi = i;
                    bj = j;
                }
            }
        if (bi >= 0) {
            std::swap(pi[bi], pi[bj]);
            cost = best;
            improved = true;
            continue;
        }
        if (!use3) break;
        int ri = -1, rj = -1, rk = -1;
        for (int i = 0; i < n && bi < 0; ++i)
            for (int j = 0; j < n; ++j) {
                if (j == i || group[i] != group[j]) continue;
                for (int k = 0; k < n; ++k) {
                    if (k == i || k == j || group[k] != group[i]) continue;
                    // rotate pi[i] <- pi[j] <- pi[k] <- pi[i]
                    const int t = pi[i];
                    pi[i] = pi[j];
                    pi[j] = pi[k];
                    pi[k] = t;
                    const double c = perm_cost(a, b, p, pi);
                    pi[k] = pi[j];
                    pi[j] = pi[i];
                    pi[i] = t;
                    if (c < best - 1e-15) {
                        best = c;
                        ri = i;
                        rj = j;
                        rk = k;
                    }
                }
            }
        if (ri >= 0) {
            const int t = pi[ri];
            pi[ri] = pi[rj];
            pi[rj] = pi[rk];
            pi[rk] = t;
            cost = best;
            improved = true;
        }
    }
}

// Round the dense plan to the best reachable vertex plan. Only valid when the
// marginal multisets coincide (then permutation-like plans are feasible).
bool polish_vertex(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& p,
                   const Eigen::VectorXd& q, const Eigen::MatrixXd& t, std::vector<int>& best_pi,
                   double& best_cost) {
    const int n = static_cast<int>(p.size());
    if (q.size() != n) return false;
    std::vector<double> sp(p.data(), p.data() + n), sq(q.data(), q.data() + n);
    std::sort(sp.begin(), sp.end());
    std::sort(sq.begin(), sq.end());
    for (int i = 0; i < n; ++i)
        if (std::abs(sp[i] - sq[i]) > 1e-12) return false;

    // group rows by identical mass; only same-group swaps keep feasibility
    std::vector<int> group(n, 0);
    {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return p[x] < p[y]; });
        int gid = 0;
        group[idx[0]] = 0;
        for (int r = 1; r < n; ++r) {
            if (std::abs(p[idx[r]] - p[idx[r - 1]]) > 1e-12) ++gid;
            group[idx[r]] = gid;
        }
    }

    // small instances: enumerate every mass-feasible vertex plan outright
    if (n <= 8) {
        std::vector<int> pi(n);
        std::iota(pi.begin(), pi.end(), 0);
        best_cost = kInf;
        do {
            bool ok = true;
            for (int i = 0; i < n && ok; ++i) ok = std::abs(p[i] - q[pi[i]]) <= 1e-12;
            if (!ok) continue;
            const double c = perm_cost(a, b, p, pi);
            if (c < best_cost) {
                best_cost = c;
                best_pi = pi;
            }
        } while (std::next_permutation(pi.begin(), pi.end()));
        return best_cost < kInf;
    }

    // start 1: assignment maximizing plan overlap, restricted to equal-mass cells
    Eigen::MatrixXd cost_m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost_m(i, j) = std::abs(p[i] - q[j]) <= 1e-12 ? -t(i, j) : kInf;
    std::vector<int> pi = hungarian_min(cost_m);
    double c = perm_cost(a, b, p, pi);
    local_search(a, b, p, group, pi, c);
    best_pi = pi;
    best_cost = c;

    // start 2: identity map when feasible (always optimal for self pairs)
    {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) ok = std::abs(p[i] - q[i]) <= 1e-12;
        if (ok) {
            std::vector<int> pid(n);
            std::iota(pid.begin(), pid.end(), 0);
            double cid = perm_cost(a, b, p, pid);
            local_search(a, b, p, group, pid, cid);
            if (cid < best_cost) {
                best_cost = cid;
                best_pi = pid;
            }
        }
    }

    // start 3: greedy largest-entry rounding
    std::vector<std::tuple<double, int, int>> cells;
    cells.reserve(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (std::abs(p[i] - q[j]) <= 1e-12) cells.emplace_back(-t(i, j), i, j);
    std::sort(cells.begin(), cells.end());
    std::vector<int> pi2(n, -1);
    std::vector<char> used(n, false);
    int placed = 0;
    for (const auto& [negv, i, j] : cells) {
        if (pi2[i] >= 0 || used[j]) continue;
        pi2[i] = j;
        used[j] = true;
        ++placed;
    }
    if (placed == n) {
        double c2 = perm_cost(a, b, p, pi2);
        local_search(a, b, p, group, pi2, c2);
        if (c2 < best_cost) {
            best_cost = c2;
            best_pi = pi2;
        }
    }
    return true;
}

}  // namespace

// ============================================================ exact oracle

GwResult exact_gw(const MmSpace& a, const MmSpace& b) {
    const int n = a.size();
    if (n != b.size()) throw unsupported_error("exact_gw needs equal sizes");
    if (n > 8) throw unsupported_error("exact_gw limited to 8 nodes");
    if (n == 0) throw integrity_error("empty space");
    const double u = 1.0 / n;
    if ((a.measure.array() - u).abs().maxCoeff() > 1e-9 ||
        (b.measure.array() - u).abs().maxCoeff() > 1e-9)
        throw unsupported_error("exact_gw needs uniform measures");

    const Eigen::MatrixXd sa = a.dense_structure();
    const Eigen::MatrixXd sb = b.dense_structure();
    std::vector<int> pi(n), best(n);
    std::iota(pi.begin(), pi.end(), 0);
    best = pi;
    double best_cost = kInf;
    long long count = 0;
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const double d = sa(i, k) - sb(pi[i], pi[k]);
                c += d * d;
            }
        if (c < best_cost) {
            best_cost = c;
            best = pi;
        }
        ++count;
    } while (std::next_permutation(pi.begin(), pi.end()));

    GwResult r;
    r.cost = best_cost / (static_cast<double>(n) * n);
    r.coupling.plan = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) r.coupling.plan(i, best[i]) = u;
    r.coupling.row_marginal = a.measure;
    r.coupling.col_marginal = b.measure;
    r.converged = true;
    r.iterations = static_cast<int>(count);
    return r;
}

// ============================================================ entropic solver

namespace {

GwResult entropic_core(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& p_in,
                       const Eigen::MatrixXd& b_in, const Eigen::VectorXd& q_in, double epsilon,
                       double tol, int max_outer, int max_inner) {
    // canonical node order on both sides: the whole solve becomes a pure
    // function of the underlying spaces, independent of input labeling
    const auto oa = canonical_order(a_in, p_in);
    const auto ob = canonical_order(b_in, q_in);
    const int n = static_cast<int>(p_in.size());
    const int m = static_cast<int>(q_in.size());
    Eigen::MatrixXd a(n, n), b(m, m);
    Eigen::VectorXd p(n), q(m);
    for (int i = 0; i < n; ++i) {
        p[i] = p_in[oa[i]];
        for (int k = 0; k < n; ++k) a(i, k) = a_in(oa[i], oa[k]);
    }
    for (int j = 0; j < m; ++j) {
        q[j] = q_in[ob[j]];
        for (int l = 0; l < m; ++l) b(j, l) = b_in(ob[j], ob[l]);
    }

    const Eigen::MatrixXd a2 = a.cwiseProduct(a);
    const Eigen::MatrixXd b2 = b.cwiseProduct(b);
    const Eigen::VectorXd ca = a2 * p;
    const Eigen::VectorXd cb = b2 * q;

    Eigen::MatrixXd t = p * q.transpose();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd d(n, m), mcost(n, m);

    double e = std::max(0.5, epsilon);
    bool converged = false;
    int it = 0;
    while (it < max_outer) {
        mcost = (ca.replicate(1, m) + cb.transpose().replicate(n, 1) - 2.0 * a * t * b);
        sinkhorn_log(mcost, p, q, e, tol, max_inner, f, g, d);
        if (!d.allFinite()) throw numerical_error("entropic_gw: sinkhorn diverged (raise epsilon)");
        ++it;
        if (it == 1 && (d - p * q.transpose()).cwiseAbs().maxCoeff() < 1e-9) {
            // symmetric instance parked at the product plan: nudge it off the
            // fixed point with a fixed pattern, then continue
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) t(i, j) *= 1.0 + 0.05 * fixed_pattern(i, j);
            repair_marginals(t, p, q);
            continue;
        }
        // exact line search of the unregularized objective along [t, d]
        const Eigen::MatrixXd delta = d - t;
        const Eigen::MatrixXd ab_delta = a * delta * b;
        const double qa = q_form(a2, b2, ab_delta, delta, delta);
        const double qb = 2.0 * q_form(a2, b2, a * t * b, delta, t);
        double s;
        if (qa > 1e-18) s = std::clamp(-qb / (2.0 * qa), 0.0, 1.0);
        else s = (qa + qb < 0.0) ? 1.0 : 0.0;
        const double dt = (s * delta).cwiseAbs().maxCoeff();
        t += s * delta;
        if (e > epsilon) {
            e = std::max(epsilon, 0.8 * e);
        } else if (dt < tol) {
            converged = true;
            break;
        }
    }

    repair_marginals(t, p, q);
    double cost = objective(a, b, a2, b2, t);
    // when the marginals admit a vertex (permutation-like) plan, always round
    // to the best vertex found: this keeps the reported cost comparable to
    // permutation-based references and makes self-distances exactly zero
    std::vector<int> pi;
    double pcost = 0.0;
    if (polish_vertex(a, b, p, q, t, pi, pcost)) {
        t.setZero();
        for (int i = 0; i < n; ++i) t(i, pi[i]) = p[i];
        cost = pcost;
    }
    if (!std::isfinite(cost)) throw numerical_error("entropic_gw: non-finite objective");

    GwResult r;
    r.cost = cost;
    r.converged = converged;
    r.iterations = it;
    // undo the canonical permutations
    r.coupling.plan.resize(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) r.coupling.plan(oa[i], ob[j]) = t(i, j);
    r.coupling.row_marginal = p_in;
    r.coupling.col_marginal = q_in;
    return r;
}

}  // namespace

GwResult entropic_gw(const MmSpace& a, const MmSpace& b, double epsilon, double tol, int max_outer,
                     int max_inner) {
    if (epsilon <= 0.0) throw integrity_error("entropic_gw needs epsilon > 0");
    check_measure(a.measure, "entropic_gw lhs");
    check_measure(b.measure, "entropic_gw rhs");
    const Eigen::MatrixXd sa = a.dense_structure();
    const Eigen::MatrixXd sb = b.dense_structure();
    // canonical orientation: always solve the (smaller, larger) ordering so
    // that cost(a,b) and cost(b,a) run the identical computation
    if (compare_spaces(sa, a.measure, sb, b.measure) > 0) {
        GwResult r = entropic_core(sb, b.measure, sa, a.measure, epsilon, tol, max_outer, max_inner);
        r.coupling.plan = r.coupling.plan.transpose().eval();
        std::swap(r.coupling.row_marginal, r.coupling.col_marginal);
        return r;
    }
    return entropic_core(sa, a.measure, sb, b.measure, epsilon, tol, max_outer, max_inner);
}

// ============================================================ fixed-plan cost

double gw_cost_at(const MmSpace& a, const MmSpace& b, const Coupling& t) {
    if (t.plan.rows() != a.size() || t.plan.cols() != b.size())
        throw integrity_error("gw_cost_at shape mismatch");
    const Eigen::VectorXd p = t.plan.rowwise().sum();
    const Eigen::VectorXd q = t.plan.colwise().sum().transpose();
    const Eigen::SparseMatrix<double> sa2 = a.structure.cwiseProduct(a.structure);
    const Eigen::SparseMatrix<double> sb2 = b.structure.cwiseProduct(b.structure);
    const Eigen::MatrixXd at = a.structure * t.plan;
    const Eigen::MatrixXd atb = at * b.structure;
    return p.dot(sa2 * p) + q.dot(sb2 * q) - 2.0 * (t.plan.array() * atb.array()).sum();
}

// ============================================================ spectral lift

Eigen::MatrixXd spectral_embed(const MmSpace& a, int d) {
    if (d < 1) throw integrity_error("spectral_embed needs d >= 1");
    const int n = a.size();
    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs;

    if (n <= 256) {
        const Eigen::MatrixXd s = a.dense_structure();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        evals = es.eigenvalues();
        evecs = es.eigenvectors();
    } else {
        // orthogonal (subspace) iteration with Rayleigh-Ritz extraction;
        // converges to the d eigenpairs of largest magnitude
        const int r = std::min(n, d + 4);
        Rng rng(0x5eedau);
        Eigen::MatrixXd x(n, r);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < r; ++j) x(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        Eigen::MatrixXd qmat = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
        // fixed iteration budget: the leading eigenpairs converge geometrically
        // and the trailing bulk directions only need to span a stable dominant
        // subspace, so a modest constant is enough
        for (int itr = 0; itr < 24; ++itr) {
            Eigen::MatrixXd z = a.structure * qmat;
            Eigen::HouseholderQR<Eigen::MatrixXd> qr2(z);
            qmat = qr2.householderQ() * Eigen::MatrixXd::Identity(n, r);
        }
        const Eigen::MatrixXd small = qmat.transpose() * (a.structure * qmat);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (small + small.transpose()));
        evals = es.eigenvalues();
        evecs = qmat * es.eigenvectors();
    }

    std::vector<int> idx(evals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int x, int y) {
        const double ax = std::abs(evals[x]), ay = std::abs(evals[y]);
        if (ax != ay) return ax > ay;
        return evals[x] > evals[y];
    });

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, d);
    const int take = std::min<int>(d, static_cast<int>(idx.size()));
    for (int j = 0; j < take; ++j) {
        const double lam = evals[idx[j]];
        if (std::abs(lam) < 1e-12) continue;  // rank deficit: leave zero column
        Eigen::VectorXd v = evecs.col(idx[j]);
        // sign convention: largest-absolute entry positive, ties by lowest index
        int arg = 0;
        double besta = -1.0;
        for (int i = 0; i < n; ++i) {
            const double av = std::abs(v[i]);
            if (av > besta + 1e-15) {
                besta = av;
                arg = i;
            }
        }
        if (v[arg] < 0.0) v = -v;
        out.col(j) = v * std::sqrt(std::abs(lam));
    }
    return out;
}

// ============================================================ 1D GW

Gw1dResult gw_1d(const Weighted1d& x, const Weighted1d& y) {
    const int n = static_cast<int>(x.pos.size());
    const int m = static_cast<int>(y.pos.size());
    if (n == 0 || m == 0) throw integrity_error("gw_1d: empty support");

    const double mx = x.w.dot(x.pos), my = y.w.dot(y.pos);
    const double vx = x.w.dot(x.pos.cwiseProduct(x.pos));
    const double vy = y.w.dot(y.pos.cwiseProduct(y.pos));
    const double base = 2.0 * (vx - mx * mx) + 2.0 * (vy - my * my) + 4.0 * mx * my;

    // north-west corner walk; `rev` traverses y from the top (anti-monotone)
    auto walk = [&](bool rev) {
        std::vector<std::tuple<int, int, double>> plan;
        plan.reserve(n + m);
        double cross = 0.0;
        int i = 0, j = 0;
        double ri = x.w[0], rj = y.w[rev ? m - 1 : 0];
        while (i < n && j < m) {
            const int jj = rev ? m - 1 - j : j;
            const double w = std::min(ri, rj);
            if (w > 0.0) {
                plan.emplace_back(i, jj, w);
                cross += w * x.pos[i] * y.pos[jj];
            }
            ri -= w;
            rj -= w;
            if (ri <= 1e-15 && i + 1 < n) ri = x.w[++i];
            else if (ri <= 1e-15) ++i;
            if (rj <= 1e-15 && j + 1 < m) rj = y.w[rev ? m - 1 - (++j) : ++j];
            else if (rj <= 1e-15) ++j;
        }
        return std::make_pair(base - 4.0 * cross, std::move(plan));
    };

    auto [cost_mono, plan_mono] = walk(false);
    auto [cost_anti, plan_anti] = walk(true);
    Gw1dResult r;
    if (cost_mono <= cost_anti) {
        r.cost = cost_mono;
        r.plan = std::move(plan_mono);
    } else {
        r.cost = cost_anti;
        r.plan = std::move(plan_anti);
    }
    return r;
}

// ============================================================ sliced GW

namespace {

// Scale the coordinate cloud so that its measure-weighted pairwise difference
// energy sum_ik mu_i mu_k |x_i - x_k|^2 equals the structure self-energy
// p^T (S o S) p. The raw eigen-coordinates shrink relative to the structure
// entries as the space grows, which would make slice costs between spaces of
// different sizes reflect size instead of structure; after this calibration
// the 1D costs live on the same scale as the quadratic structure objective.
Eigen::MatrixXd calibrated_embed(const MmSpace& s, int d) {
    Eigen::MatrixXd x = spectral_embed(s, d);
    const Eigen::VectorXd& mu = s.measure;
    const Eigen::RowVectorXd mean = mu.transpose() * x;
    double ediff = 0.0;
    for (int i = 0; i < x.rows(); ++i) ediff += mu[i] * (x.row(i) - mean).squaredNorm();
    ediff *= 2.0;
    double eself = 0.0;
    for (int k = 0; k < s.structure.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(s.structure, k); it; ++it)
            eself += mu[it.row()] * mu[it.col()] * it.value() * it.value();
    if (ediff > 1e-300) x *= std::sqrt(eself / ediff);
    return x;
}

}  // namespace

namespace {

// Shared slice loop. Returns the mean slice cost; when `acc` is non-null the
// per-slice staircase couplings are accumulated into it as (row, col, mass/L)
// triplets mapped back to original indices.
double sliced_core(const MmSpace& a, const MmSpace& b, const SliceSet& slices,
                   std::vector<std::tuple<int, int, double>>* acc) {
    const int d = slices.dim();
    const int l = slices.count();
    const int n = a.size(), m = b.size();
    const Eigen::MatrixXd xa = calibrated_embed(a, d);
    const Eigen::MatrixXd xb = calibrated_embed(b, d);

    double total = 0.0;
    std::vector<std::pair<double, int>> ka(n), kb(m);
    for (int s = 0; s < l; ++s) {
        const Eigen::VectorXd pa = xa * slices.directions.row(s).transpose();
        const Eigen::VectorXd pb = xb * slices.directions.row(s).transpose();
        for (int i = 0; i < n; ++i) ka[i] = {pa[i], i};
        for (int j = 0; j < m; ++j) kb[j] = {pb[j], j};
        std::sort(ka.begin(), ka.end());  // ties break on index: deterministic
        std::sort(kb.begin(), kb.end());
        Weighted1d wx, wy;
        wx.pos.resize(n);
        wx.w.resize(n);
        wy.pos.resize(m);
        wy.w.resize(m);
        for (int i = 0; i < n; ++i) {
            wx.pos[i] = ka[i].first;
            wx.w[i] = a.measure[ka[i].second];
        }
        for (int j = 0; j < m; ++j) {
            wy.pos[j] = kb[j].first;
            wy.w[j] = b.measure[kb[j].second];
        }
        const auto r1 = gw_1d(wx, wy);
        total += r1.cost;
        if (acc)
            for (const auto& [si, sj, w] : r1.plan)
                acc->emplace_back(ka[si].second, kb[sj].second, w / l);
    }
    return total / l;
}

}  // namespace

double sliced_gw_cost(const MmSpace& a, const MmSpace& b, const SliceSet& slices) {
    return sliced_core(a, b, slices, nullptr);
}

GwResult sliced_gw(const MmSpace& a, const MmSpace& b, const SliceSet& slices) {
    const int l = slices.count();
    const int n = a.size(), m = b.size();

    // Plans are accumulated as sparse triplets: each staircase coupling has at
    // most n+m-1 entries and exact marginals, so their average does too, and
    // the dense matrix only needs to be touched once at the end.
    std::vector<std::tuple<int, int, double>> acc;
    acc.reserve(static_cast<std::size_t>(l) * (n + m));
    const double mean_cost = sliced_core(a, b, slices, &acc);

    // scale rows and columns on the triplets until both marginals sit well
    // inside tolerance (they already do up to float rounding; this is a cheap
    // O(nnz) safety net, not a solver)
    Eigen::VectorXd rs = Eigen::VectorXd::Zero(n), cs = Eigen::VectorXd::Zero(m);
    for (const auto& [i, j, w] : acc) {
        rs[i] += w;
        cs[j] += w;
    }
    for (int pass = 0; pass < 20; ++pass) {
        const double err = std::max((rs - a.measure).cwiseAbs().maxCoeff(),
                                    (cs - b.measure).cwiseAbs().maxCoeff());
        if (err < 1e-9) break;
        Eigen::VectorXd rf(n), cf(m);
        for (int i = 0; i < n; ++i) rf[i] = rs[i] > 0.0 ? a.measure[i] / rs[i] : 1.0;
        for (auto& [i, j, w] : acc) w *= rf[i];
        cs.setZero();
        for (const auto& [i, j, w] : acc) cs[j] += w;
        for (int j = 0; j < m; ++j) cf[j] = cs[j] > 0.0 ? b.measure[j] / cs[j] : 1.0;
        for (auto& [i, j, w] : acc) w *= cf[j];
        rs.setZero();
        cs.setZero();
        for (const auto& [i, j, w] : acc) {
            rs[i] += w;
            cs[j] += w;
        }
    }

    // bucket the triplets by column (counting sort), then zero and fill each
    // column in one sequential pass over the dense storage
    std::vector<int> col_off(m + 2, 0);
    for (const auto& [i, j, w] : acc) ++col_off[j + 2];
    for (int j = 2; j <= m + 1; ++j) col_off[j] += col_off[j - 1];
    std::vector<std::pair<int, double>> by_col(acc.size());
    for (const auto& [i, j, w] : acc) by_col[col_off[j + 1]++] = {i, w};
    Eigen::MatrixXd plan(n, m);
    for (int j = 0; j < m; ++j) {
        double* col = plan.data() + static_cast<std::ptrdiff_t>(j) * n;
        std::fill(col, col + n, 0.0);
        for (int t = col_off[j]; t < col_off[j + 1]; ++t) col[by_col[t].first] += by_col[t].second;
    }

    GwResult r;
    r.cost = mean_cost;
    r.coupling.plan = std::move(plan);
    r.coupling.row_marginal = a.measure;
    r.coupling.col_marginal = b.measure;
    r.converged = true;
    r.iterations = l;
    return r;
}

// ============================================================ envelope gradient

Eigen::MatrixXd gw_gradient_b(const MmSpace& a, const MmSpace& b, const Coupling& t) {
    if (t.plan.rows() != a.size() || t.plan.cols() != b.size())
        throw integrity_error("gw_gradient_b shape mismatch");
    const Eigen::VectorXd q = t.plan.colwise().sum().transpose();
    const Eigen::MatrixXd tat = t.plan.transpose() * (a.structure * t.plan);
    Eigen::MatrixXd g = 2.0 * (b.dense_structure().cwiseProduct(q * q.transpose()) - tat);
    g = 0.5 * (g + g.transpose()).eval();
    g.diagonal().setZero();
    return g;
}

}  // namespace scgfm
