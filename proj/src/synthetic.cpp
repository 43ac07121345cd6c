#include "scgfm/synthetic.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <algorithm>
#include <set>

namespace scgfm {

namespace {

void finish_graph(Graph& g) {
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    g.features = Eigen::MatrixXd::Ones(g.n, 1);
    g.has_features = false;
}

}  // namespace

Graph clique_with_tail(int n, std::uint64_t seed) {
    if (n < 4) throw integrity_error("clique_with_tail needs n >= 4");
    Rng rng(seed);
    const int lo = std::max(3, n / 2);
    const int hi = std::max(lo, 2 * n / 3);
    const int core = static_cast<int>(rng.uniform_int(lo, hi));
    Graph g;
    g.n = n;
    for (int i = 0; i < core; ++i)
        for (int j = i + 1; j < core; ++j) g.edges.emplace_back(i, j);
    int anchor = static_cast<int>(rng.uniform_int(0, core - 1));
    for (int v = core; v < n; ++v) {
        g.edges.emplace_back(std::min(anchor, v), std::max(anchor, v));
        anchor = v;  // tail continues as a path
    }
    g.label = 0;
    finish_graph(g);
    return g;
}

Graph cycle_with_chords(int n, std::uint64_t seed) {
    if (n < 4) throw integrity_error("cycle_with_chords needs n >= 4");
    Rng rng(seed);
    Graph g;
    g.n = n;
    std::set<std::pair<int, int>> used;
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        used.emplace(std::min(i, j), std::max(i, j));
    }
    const int chords = std::max(1, n / 4);
    int added = 0;
    for (int tries = 0; added < chords && tries < 50 * chords; ++tries) {
        const int u = static_cast<int>(rng.uniform_int(0, n - 1));
        const int v = static_cast<int>(rng.uniform_int(0, n - 1));
        if (u == v) continue;
        const auto e = std::make_pair(std::min(u, v), std::max(u, v));
        if (used.count(e)) continue;
        used.insert(e);
        ++added;
    }
    g.edges.assign(used.begin(), used.end());
    g.label = 1;
    finish_graph(g);
    return g;
}

std::vector<Graph> two_class_corpus(int count, int n_min, int n_max, std::uint64_t seed) {
    if (count < 2 || n_min < 4 || n_max < n_min)
        throw integrity_error("two_class_corpus: bad parameters");
    std::vector<Graph> out;
    out.reserve(count);
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const int n = static_cast<int>(rng.uniform_int(n_min, n_max));
        const std::uint64_t s = rng.next_u64();
        out.push_back(i % 2 == 0 ? clique_with_tail(n, s) : cycle_with_chords(n, s));
    }
    return out;
}

}  // namespace scgfm
