#pragma once

#include "scgfm/bases.hpp"
#include "scgfm/decoder.hpp"
#include "scgfm/graph.hpp"
#include "scgfm/stats.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace scgfm {

struct TrainConfig {
    int k = 16;
    int m_nodes = 32;
    int slices = 50;
    double temperature = 0.3;
    double alpha = 2.0;
    double beta = 0.05;
    double margin = 10.0;
    int epochs = 60;
    int batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 42;
    std::string solver = "entropic";  // entropic | sliced
    bool stop_grad_weights = false;
    std::string optimizer = "adam";  // adam | sgd
    int decoder_hidden = 64;

    void validate() const;
    GwSolver make_solver() const;  // training-time solver (seeded slice set)
};

struct EpochRecord {
    int epoch = 0;
    double gw = 0.0;
    double rec = 0.0;
    double div = 0.0;
    double total = 0.0;
};

struct Checkpoint {
    std::string version = "scgfm-checkpoint-v1";
    TrainConfig config;
    BaseDictionary dict;
    Decoder decoder;
    int feature_dim = kStatDim;  // decoder target layout, see stats
    std::vector<EpochRecord> log;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// One training example: mm-space plus its precomputed statistics target.
struct TrainItem {
    MmSpace space;
    Eigen::VectorXd target;  // length kStatDim
};

struct TotalLossResult {
    double gw = 0.0;
    double rec = 0.0;
    double div = 0.0;
    double total = 0.0;
    std::vector<Eigen::MatrixXd> base_grads;  // d total / d B_k
    DecoderGrads decoder_grads;               // d total / d decoder params
};

// Batch loss: mean GW reconstruction against the linear surrogate + alpha *
// mean statistics MSE + beta * diversity, with envelope gradients for every
// GW term (couplings treated as locally constant).
TotalLossResult total_loss(const std::vector<TrainItem>& batch, const BaseDictionary& dict,
                           const Decoder& dec, const TrainConfig& cfg);

using MetricsSink = std::function<void(const EpochRecord&)>;

Checkpoint pretrain(const std::vector<Graph>& corpus, const TrainConfig& cfg,
                    const MetricsSink& sink = nullptr);

struct GradCheckReport {
    double gw_max_rel = 0.0;   // envelope components (base gradients minus diversity)
    double rec_max_rel = 0.0;  // decoder parameters (exact chain)
    double div_max_rel = 0.0;  // diversity wrt bases (exact)
    bool pass = false;
};

GradCheckReport grad_check(const TrainConfig& cfg, std::uint64_t seed);

struct SurrogateReportRow {
    double surrogate_error = 0.0;
    double barycenter_error = 0.0;
    double surrogate_seconds = 0.0;
    double barycenter_seconds = 0.0;
};

struct SurrogateReport {
    std::vector<SurrogateReportRow> rows;
    double surrogate_mean = 0.0;
    double barycenter_mean = 0.0;
    double surrogate_mean_seconds = 0.0;
    double barycenter_mean_seconds = 0.0;
};

// Compares the linear surrogate against a 20-iteration fixed-point GW
// barycenter of the bases (seeded at the surrogate); errors via sliced GW.
SurrogateReport surrogate_vs_barycenter(const std::vector<MmSpace>& corpus,
                                        const BaseDictionary& dict);

}  // namespace scgfm
