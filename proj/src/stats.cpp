#include "scgfm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scgfm {

namespace {

// triangles through each node, via sorted-neighbor-list intersections
std::vector<long long> triangles_per_node(const Graph& g) {
    const auto adj = g.adjacency_list();
    std::vector<long long> tri(g.n, 0);
    for (const auto& [u, v] : g.edges) {
        const auto& a = adj[u];
        const auto& b = adj[v];
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] < b[j]) ++i;
            else if (a[i] > b[j]) ++j;
            else {
                ++tri[u];
                ++tri[v];
                ++tri[a[i]];
                ++i;
                ++j;
            }
        }
    }
    // each triangle was found once per edge, i.e. 3 times per corner pair
    for (auto& t : tri) t /= 3;
    return tri;
}

}  // namespace

MotifCounts count_motifs(const Graph& g) {
    const auto deg = g.degrees();
    const long long m = g.num_edges();
    const auto tri = triangles_per_node(g);

    long long tr_a3 = 0;  // closed 3-walks: 6 per triangle, 2 per corner... = 2*tri_i per node
    for (int i = 0; i < g.n; ++i) tr_a3 += 2 * tri[i];

    // tr(A^4) = ||A^2||_F^2 and tr(A^5) = <A^2, A^3> via sparse products
    const auto a = g.sparse_adjacency();
    const Eigen::SparseMatrix<double> a2 = (a * a).pruned();
    const double tr_a4 = a2.cwiseProduct(a2).sum();

    long long sum_dd = 0;
    for (int i = 0; i < g.n; ++i) sum_dd += static_cast<long long>(deg[i]) * (deg[i] - 1);

    MotifCounts out;
    out.triangles = tr_a3 / 6;
    out.c4 = std::llround((tr_a4 - 2.0 * m - 2.0 * sum_dd) / 8.0);

    const Eigen::SparseMatrix<double> a3 = (a2 * a).pruned();
    const double tr_a5 = a2.cwiseProduct(a3).sum();
    double corr = 0.0;  // walks reusing an edge around a triangle
    for (int i = 0; i < g.n; ++i) corr += (deg[i] - 2.0) * 2.0 * tri[i];
    out.c5 = std::llround((tr_a5 - 5.0 * tr_a3 - 5.0 * corr) / 10.0);
    return out;
}

StatVector feature_extract(const Graph& g) {
    StatVector sv;
    sv.values = Eigen::VectorXd::Zero(kStatDim);
    const int n = g.n;
    const auto deg = g.degrees();
    const double denom = std::max(n - 1, 1);

    auto bin_of = [](double x, int bins) {
        int b = static_cast<int>(x * bins);
        return std::clamp(b, 0, bins - 1);  // right-closed last bin
    };

    for (int i = 0; i < n; ++i) sv.values[bin_of(deg[i] / denom, kDegreeBins)] += 1.0;
    sv.values.head(kDegreeBins) /= n;

    const auto tri = triangles_per_node(g);
    for (int i = 0; i < n; ++i) {
        double c = 0.0;
        if (deg[i] >= 2) c = 2.0 * tri[i] / (static_cast<double>(deg[i]) * (deg[i] - 1));
        sv.values[kDegreeBins + bin_of(c, kClusteringBins)] += 1.0;
    }
    sv.values.segment(kDegreeBins, kClusteringBins) /= n;

    const auto mc = count_motifs(g);
    sv.values[kDegreeBins + kClusteringBins + 0] = std::log1p(static_cast<double>(mc.triangles)) / n;
    sv.values[kDegreeBins + kClusteringBins + 1] = std::log1p(static_cast<double>(mc.c4)) / n;
    sv.values[kDegreeBins + kClusteringBins + 2] = std::log1p(static_cast<double>(mc.c5)) / n;
    return sv;
}

}  // namespace scgfm
