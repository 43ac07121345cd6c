#pragma once

#include "scgfm/embed.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scgfm {

// One few-shot episode: disjoint support/query sampled from a labeled pool.
struct Episode {
    int n_way = 2;
    int k_shot = 5;
    int queries_per_class = 50;
    std::vector<std::pair<Eigen::VectorXd, int>> support;  // (vector, class)
    std::vector<std::pair<Eigen::VectorXd, int>> query;
    std::uint64_t seed = 0;
};

std::vector<Episode> sample_episodes(const std::vector<Embedding>& pool, int n_way, int k_shot,
                                     int queries, int runs, std::uint64_t seed);

struct ProtoResult {
    double accuracy = 0.0;
    std::vector<int> predictions;
};

// Prototypical classification: optional per-dimension z-scoring with support
// statistics (std floor 1e-8), nearest prototype in Euclidean distance, ties
// to the lower class index.
ProtoResult proto_classify(const Episode& ep, bool standardize);

// Linear centered kernel alignment in [0,1].
double cka_linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct IsometryRow {
    int i = 0, j = 0;
    double gw_distance = 0.0;
    double latent_distance = 0.0;
};

struct IsometryResult {
    double rho = 0.0;
    double p_value = 1.0;
    std::vector<IsometryRow> table;
};

// Correlation between reference GW distances and embedding distances over
// sampled graph pairs; permutation-test p-value with 10^4 shuffles.
IsometryResult isometry_study(const std::vector<Graph>& graphs, const Checkpoint& ckpt, int pairs,
                              std::uint64_t seed);

enum class FisherComponent { coords, decoded, features, full };

// Between/within scatter ratio S_b / S_w of the selected embedding block.
double fisher_ratio(const std::vector<Embedding>& embs, FisherComponent component);

}  // namespace scgfm
