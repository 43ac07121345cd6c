#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace scgfm {

// Undirected simple graph. Edges are stored once with first < second,
// lexicographically sorted and unique; loaders and generators enforce this.
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;
    Eigen::MatrixXd features;      // n x F; constant 1.0 column when the source had none
    bool has_features = false;     // true iff real-valued node attributes were supplied
    int label = -1;                // graph-level class label; -1 = unlabeled
    std::vector<int> node_labels;  // per-node labels; empty = none

    int num_edges() const { return static_cast<int>(edges.size()); }
    std::vector<int> degrees() const;
    std::vector<std::vector<int>> adjacency_list() const;
    Eigen::SparseMatrix<double> sparse_adjacency() const;
    Eigen::MatrixXd dense_adjacency() const;
    void validate() const;  // throws integrity_error on any invariant violation
};

// Metric measure space: pairwise structure matrix over a node support plus a
// probability measure. Produced from graphs by to_mm_space; also the container
// for trainable bases (dense structure wrapped as sparse where needed).
struct MmSpace {
    Eigen::SparseMatrix<double> structure;  // support x support, symmetric, zero diagonal
    Eigen::VectorXd measure;                // nonnegative, sums to 1
    std::vector<int> index_map;             // support position -> original node id

    int size() const { return static_cast<int>(measure.size()); }
    Eigen::MatrixXd dense_structure() const { return Eigen::MatrixXd(structure); }
};

// Degree-based measure: mu(i) = deg(i) / sum(deg). Zero-degree nodes are
// dropped from the support (index_map records the survivors); edgeless graphs
// fall back to the uniform measure over all nodes.
MmSpace to_mm_space(const Graph& g);

// Build an MmSpace directly from a dense symmetric structure + measure
// (used for dictionary bases and synthetic test instances).
MmSpace mm_from_dense(const Eigen::MatrixXd& structure, const Eigen::VectorXd& measure);
MmSpace mm_uniform(const Eigen::MatrixXd& structure);

// ---- dataset IO ----

// TU-style text datasets: <name>_A.txt, <name>_graph_indicator.txt,
// <name>_graph_labels.txt, optional <name>_node_labels.txt /
// <name>_node_attributes.txt; 1-based indices on disk.
std::vector<Graph> load_tu_dataset(const std::string& dir);
void write_tu_dataset(const std::string& dir, const std::string& name,
                      const std::vector<Graph>& graphs);

// JSON-lines: one object per line:
//   {"n": 3, "edges": [[0,1],[1,2]], "features": [[...]...],
//    "label": 0, "node_labels": [..]}
// features / label / node_labels optional.
std::vector<Graph> load_json_graphs(const std::string& path);
void save_json_graphs(const std::string& path, const std::vector<Graph>& graphs);

// ---- generators / samplers ----

Graph generate_er(int n, double p, std::uint64_t seed);

// Personalized-PageRank scores from `center` by power iteration:
// x <- alpha * e_c + (1 - alpha) * W x with W the column-stochastic walk
// matrix (zero columns for isolated nodes). Exposed for oracle tests.
Eigen::VectorXd ppr_scores(const Graph& g, int center, double alpha, int steps = 50);

// Ego-subgraph: center plus the top (cap - 1) PPR-scoring nodes, ties broken
// by lower node id; induced edges; the output graph's label is the center's
// node label when per-node labels exist, else the input's graph label.
Graph ppr_subgraph(const Graph& g, int center, int cap = 100, double alpha = 0.15);

// Each edge is independently relocated with probability epsilon to a uniformly
// random non-existing, non-self slot; when no slot is found the edge is kept.
// Features and labels are untouched; edge count is preserved.
Graph rewire(const Graph& g, double epsilon, std::uint64_t seed);

}  // namespace scgfm
