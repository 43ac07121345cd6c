#pragma once

#include "scgfm/bases.hpp"
#include "scgfm/trainer.hpp"

#include <string>
#include <vector>

namespace scgfm {

// Assembled graph embedding z = [coords | decoded | vec(features)] with the
// feature block flattened row-major.
struct Embedding {
    Eigen::VectorXd coords;    // K, simplex
    Eigen::VectorXd decoded;   // r
    Eigen::MatrixXd features;  // M x F
    int graph_id = -1;
    int label = -1;

    int length() const {
        return static_cast<int>(coords.size() + decoded.size() + features.size());
    }
    Eigen::VectorXd to_vector() const;
};

// Transport-plan feature projection: H_k = N * T_k^T * X over the coupled
// support (N = support size), combined as H = sum_k w_k H_k.
Eigen::MatrixXd project_features(const Graph& g, const MmSpace& space,
                                 const CoordinateResult& coords, int m);

Embedding embed_graph(const Graph& g, const Checkpoint& ckpt, const GwSolver& solver);

std::vector<Embedding> embed_corpus(const std::vector<Graph>& corpus, const Checkpoint& ckpt,
                                    const GwSolver& solver);

// JSON-lines records {graph_id, label, k, r, m, f, z:[...]}.
void save_embeddings_jsonl(const std::string& path, const std::vector<Embedding>& embs);
std::vector<Embedding> load_embeddings_jsonl(const std::string& path);

// Flat binary: two text header lines then per-record little-endian payloads
// (int64 graph_id, int64 label, dim doubles).
void save_embeddings_binary(const std::string& path, const std::vector<Embedding>& embs);
std::vector<Embedding> load_embeddings_binary(const std::string& path);

}  // namespace scgfm
