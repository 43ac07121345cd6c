#pragma once

#include "scgfm/graph.hpp"

#include <Eigen/Dense>

namespace scgfm {

// Layout of the graph-statistics target vector: 8 degree-histogram bins,
// 8 clustering-histogram bins, then [log(1+T)/N, log(1+C4)/N, log(1+C5)/N]
// for triangle / 4-cycle / 5-cycle counts.
inline constexpr int kDegreeBins = 8;
inline constexpr int kClusteringBins = 8;
inline constexpr int kMotifFeatures = 3;
inline constexpr int kStatDim = kDegreeBins + kClusteringBins + kMotifFeatures;

struct StatVector {
    Eigen::VectorXd values;  // length kStatDim
};

struct MotifCounts {
    long long triangles = 0;
    long long c4 = 0;
    long long c5 = 0;
};

// Simple-cycle counts from adjacency-power traces with degeneracy
// corrections:
//   T  = tr(A^3) / 6
//   C4 = (tr(A^4) - 2m - 2 * sum_i d_i (d_i - 1)) / 8
//   C5 = (tr(A^5) - 5 tr(A^3) - 5 * sum_i (d_i - 2) A^3_ii) / 10
MotifCounts count_motifs(const Graph& g);

// Degree histogram (degrees normalized by N-1), local-clustering histogram
// (coefficient 0 for degree < 2), both normalized to sum 1, plus the
// log-scaled motif block.
StatVector feature_extract(const Graph& g);

}  // namespace scgfm
