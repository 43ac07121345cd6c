// Command-line entry point: pretraining, embedding, evaluation, corpus
// generation, and diagnostics, all deterministic under explicit seeds.
#include "scgfm/embed.hpp"
#include "scgfm/errors.hpp"
#include "scgfm/eval.hpp"
#include "scgfm/graph.hpp"
#include "scgfm/parallel.hpp"
#include "scgfm/rng.hpp"
#include "scgfm/stats.hpp"
#include "scgfm/synthetic.hpp"
#include "scgfm/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

using namespace scgfm;
using nlohmann::json;

namespace {

std::vector<Graph> load_corpus(const std::string& path, const std::string& format) {
    if (format == "json") return load_json_graphs(path);
    if (format == "tu") return load_tu_dataset(path);
    throw integrity_error("unknown dataset format '" + format + "' (expected json or tu)");
}

GwSolver solver_from_name(const std::string& name, int slices, std::uint64_t seed) {
    if (name == "entropic") return GwSolver::make(GwSolver::entropic, 0.01);
    if (name == "exact") return GwSolver::make(GwSolver::exact);
    if (name == "sliced") {
        auto s = std::make_shared<SliceSet>(make_slices(slices, 8, derive_seed(seed, 3)));
        return GwSolver::make(GwSolver::sliced, 0.01, std::move(s));
    }
    throw integrity_error("unknown solver '" + name + "'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write " + path);
    return os;
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--k", cfg.k, "number of bases")->capture_default_str();
    cmd->add_option("--m", cfg.m_nodes, "base size (nodes per base)")->capture_default_str();
    cmd->add_option("--slices", cfg.slices, "slice count for the sliced solver")
        ->capture_default_str();
    cmd->add_option("--temperature", cfg.temperature, "softmax temperature")->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "statistics-loss weight")->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "diversity-loss weight")->capture_default_str();
    cmd->add_option("--margin", cfg.margin, "diversity margin")->capture_default_str();
    cmd->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", cfg.batch_size, "batch size")->capture_default_str();
    cmd->add_option("--lr", cfg.learning_rate, "learning rate")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "root RNG seed")->capture_default_str();
    cmd->add_option("--solver", cfg.solver, "training solver: entropic|sliced")
        ->capture_default_str();
    cmd->add_flag("--stop-grad-weights", cfg.stop_grad_weights,
                  "cut the softmax chain in GW gradients");
    cmd->add_option("--optimizer", cfg.optimizer, "adam|sgd")->capture_default_str();
    cmd->add_option("--hidden", cfg.decoder_hidden, "decoder hidden width")->capture_default_str();
}

// ------------------------------------------------------------ subcommands

int run_pretrain(const std::string& data, const std::string& format, const std::string& out,
                 const std::string& metrics_path, const TrainConfig& cfg) {
    const std::vector<Graph> corpus = load_corpus(data, format);
    std::ofstream metrics;
    if (!metrics_path.empty()) metrics = open_out(metrics_path);
    MetricsSink sink = [&](const EpochRecord& r) {
        json rec{{"epoch", r.epoch}, {"gw", r.gw}, {"rec", r.rec}, {"div", r.div},
                 {"total", r.total}};
        if (metrics) metrics << rec.dump() << "\n";
        std::fprintf(stderr, "epoch %d total %.6f (gw %.6f rec %.6f div %.6f)\n", r.epoch, r.total,
                     r.gw, r.rec, r.div);
    };
    const Checkpoint ck = pretrain(corpus, cfg, sink);
    save_checkpoint(out, ck);
    if (!ck.log.empty())
        std::printf("final epoch %d: total %.6f gw %.6f rec %.6f div %.6f\n", ck.log.back().epoch,
                    ck.log.back().total, ck.log.back().gw, ck.log.back().rec, ck.log.back().div);
    std::printf("checkpoint written to %s (%d graphs, %d epochs)\n", out.c_str(),
                static_cast<int>(corpus.size()), static_cast<int>(ck.log.size()));
    return 0;
}

int run_embed(const std::string& data, const std::string& format, const std::string& ckpt_path,
              const std::string& out, const std::string& out_format, const std::string& solver_name,
              std::uint64_t seed) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const std::vector<Graph> corpus = load_corpus(data, format);
    const GwSolver solver = solver_from_name(solver_name, ck.config.slices, seed);
    const std::vector<Embedding> embs = embed_corpus(corpus, ck, solver);
    if (out_format == "bin")
        save_embeddings_binary(out, embs);
    else if (out_format == "jsonl")
        save_embeddings_jsonl(out, embs);
    else
        throw integrity_error("unknown embedding format '" + out_format + "'");
    std::printf("wrote %d embeddings of length %d to %s\n", static_cast<int>(embs.size()),
                embs.empty() ? 0 : embs[0].length(), out.c_str());
    return 0;
}

int run_eval(const std::string& emb_path, const std::string& out, int ways, int shots, int queries,
             int runs, std::uint64_t seed, bool standardize) {
    const bool binary = emb_path.size() > 4 && emb_path.substr(emb_path.size() - 4) == ".bin";
    const std::vector<Embedding> pool =
        binary ? load_embeddings_binary(emb_path) : load_embeddings_jsonl(emb_path);
    const std::vector<Episode> eps = sample_episodes(pool, ways, shots, queries, runs, seed);
    std::ofstream os;
    if (!out.empty()) os = open_out(out);
    double mean = 0.0, m2 = 0.0;
    int run = 0;
    for (const Episode& ep : eps) {
        const ProtoResult r = proto_classify(ep, standardize);
        if (os)
            os << json{{"task", "few_shot"}, {"n_way", ways}, {"k_shot", shots},
                       {"run", run}, {"accuracy", r.accuracy}, {"standardize", standardize}}
                      .dump()
               << "\n";
        ++run;
        const double d = r.accuracy - mean;
        mean += d / run;
        m2 += d * (r.accuracy - mean);
    }
    const double sd = runs > 1 ? std::sqrt(m2 / (runs - 1)) : 0.0;
    if (os)
        os << json{{"task", "few_shot_summary"}, {"runs", runs}, {"mean", mean}, {"std", sd}}.dump()
           << "\n";
    std::printf("%d-way %d-shot over %d runs: accuracy %.4f +- %.4f\n", ways, shots, runs, mean, sd);
    return 0;
}

int run_gen(const std::string& out, int count, int n_min, int n_max, std::uint64_t seed) {
    save_json_graphs(out, two_class_corpus(count, n_min, n_max, seed));
    std::printf("wrote %d graphs to %s\n", count, out.c_str());
    return 0;
}

// ------------------------------------------------------------ diagnostics

int diag_isometry(const std::string& data, const std::string& format, const std::string& ckpt_path,
                  int pairs, std::uint64_t seed, const std::string& out) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const std::vector<Graph> corpus = load_corpus(data, format);
    const IsometryResult r = isometry_study(corpus, ck, pairs, seed);
    if (!out.empty()) {
        auto os = open_out(out);
        os << "gw_distance,latent_distance\n";
        for (const auto& row : r.table) {
            char buf[80];
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", row.gw_distance, row.latent_distance);
            os << buf;
        }
    }
    std::printf("isometry rho %.4f p %.2e over %d pairs\n", r.rho, r.p_value, pairs);
    return 0;
}

int diag_sgw_corr(const std::string& data, const std::string& format, int pairs, std::uint64_t seed,
                  const std::string& out) {
    const std::vector<Graph> corpus = load_corpus(data, format);
    if (corpus.size() < 2) throw integrity_error("need at least 2 graphs");
    std::vector<MmSpace> spaces(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) spaces[i] = to_mm_space(corpus[i]);
    const SliceSet slices = make_slices(50, 8, derive_seed(seed, 3));
    Rng rng(seed);
    Eigen::VectorXd xs(pairs), ys(pairs);
    std::ofstream os;
    if (!out.empty()) os = open_out(out);
    if (os) os << "sliced_cost,entropic_cost\n";
    for (int p = 0; p < pairs; ++p) {
        const int n = static_cast<int>(corpus.size());
        int i = static_cast<int>(rng.uniform_int(0, n - 1));
        int j = static_cast<int>(rng.uniform_int(0, n - 2));
        if (j >= i) ++j;
        xs[p] = sliced_gw(spaces[i], spaces[j], slices).cost;
        ys[p] = entropic_gw(spaces[i], spaces[j], 0.01).cost;
        if (os) {
            char buf[80];
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", xs[p], ys[p]);
            os << buf;
        }
    }
    std::printf("sliced-vs-entropic rho %.4f over %d pairs\n", pearson(xs, ys), pairs);
    return 0;
}

int diag_surrogate(const std::string& data, const std::string& format,
                   const std::string& ckpt_path, int limit, const std::string& out) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    std::vector<Graph> corpus = load_corpus(data, format);
    if (static_cast<int>(corpus.size()) > limit) corpus.resize(limit);
    std::vector<MmSpace> spaces(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) spaces[i] = to_mm_space(corpus[i]);
    const SurrogateReport rep = surrogate_vs_barycenter(spaces, ck.dict);
    if (!out.empty()) {
        auto os = open_out(out);
        os << "surrogate_error,barycenter_error,surrogate_seconds,barycenter_seconds\n";
        for (const auto& row : rep.rows) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.6g,%.6g\n", row.surrogate_error,
                          row.barycenter_error, row.surrogate_seconds, row.barycenter_seconds);
            os << buf;
        }
    }
    std::printf("surrogate mean %.6f (%.4fs/graph)  barycenter mean %.6f (%.4fs/graph)\n",
                rep.surrogate_mean, rep.surrogate_mean_seconds, rep.barycenter_mean,
                rep.barycenter_mean_seconds);
    return 0;
}

int diag_rewire(const std::string& data, const std::string& format, const std::string& ckpt_path,
                const std::string& eps_csv, int count, std::uint64_t seed, const std::string& out) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    std::vector<Graph> corpus = load_corpus(data, format);
    if (static_cast<int>(corpus.size()) > count) corpus.resize(count);
    std::vector<double> eps_list;
    {
        std::istringstream ss(eps_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) eps_list.push_back(std::stod(tok));
    }
    const GwSolver solver = GwSolver::make(GwSolver::entropic, 0.01);
    const std::vector<Embedding> base_embs = embed_corpus(corpus, ck, solver);
    std::ofstream os;
    if (!out.empty()) os = open_out(out);
    if (os) os << "epsilon,mean_cosine_distance\n";
    std::printf("rewire diagnostic over %d graphs:\n", static_cast<int>(corpus.size()));
    for (const double eps : eps_list) {
        double mean_dist = 0.0;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const Graph rew = rewire(corpus[i], eps, derive_seed(seed, i * 131 + 7));
            const Embedding e = embed_graph(rew, ck, solver);
            Eigen::Map<const Eigen::VectorXd> a(base_embs[i].features.data(),
                                                base_embs[i].features.size());
            Eigen::Map<const Eigen::VectorXd> b(e.features.data(), e.features.size());
            const double na = a.norm(), nb = b.norm();
            const double cosine = (na > 0 && nb > 0) ? a.dot(b) / (na * nb) : 1.0;
            mean_dist += 1.0 - cosine;
        }
        mean_dist /= static_cast<double>(corpus.size());
        if (os) {
            char buf[80];
            std::snprintf(buf, sizeof(buf), "%.3g,%.10g\n", eps, mean_dist);
            os << buf;
        }
        std::printf("  epsilon %.2f -> mean cosine distance %.6f\n", eps, mean_dist);
    }
    return 0;
}

int diag_fisher(const std::string& emb_path, const std::string& out) {
    const bool binary = emb_path.size() > 4 && emb_path.substr(emb_path.size() - 4) == ".bin";
    const std::vector<Embedding> pool =
        binary ? load_embeddings_binary(emb_path) : load_embeddings_jsonl(emb_path);
    std::ofstream os;
    if (!out.empty()) os = open_out(out);
    const std::pair<const char*, FisherComponent> comps[] = {
        {"coords", FisherComponent::coords},
        {"decoded", FisherComponent::decoded},
        {"features", FisherComponent::features},
        {"full", FisherComponent::full}};
    double best = -1.0;
    const char* dominant = "";
    for (const auto& [name, comp] : comps) {
        const double r = fisher_ratio(pool, comp);
        if (os) os << json{{"component", name}, {"fisher_ratio", r}}.dump() << "\n";
        std::printf("fisher %-8s %.6f\n", name, r);
        if (comp != FisherComponent::full && r > best) {
            best = r;
            dominant = name;
        }
    }
    std::printf("dominant component: %s\n", dominant);
    return 0;
}

int diag_gradcheck(std::uint64_t seed) {
    TrainConfig cfg;
    const GradCheckReport rep = grad_check(cfg, seed);
    std::printf("gradcheck: gw %.3e rec %.3e div %.3e -> %s\n", rep.gw_max_rel, rep.rec_max_rel,
                rep.div_max_rel, rep.pass ? "pass" : "FAIL");
    return rep.pass ? 0 : 1;
}

int diag_bench(const std::string& sizes_csv, std::uint64_t seed, const std::string& out) {
    std::vector<int> sizes;
    {
        std::istringstream ss(sizes_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
    }
    const SliceSet slices = make_slices(50, 8, derive_seed(seed, 3));
    std::ofstream os;
    if (!out.empty()) os = open_out(out);
    if (os) os << "n,seconds\n";
    std::printf("sliced GW scaling:\n");
    double prev = 0.0;
    for (const int n : sizes) {
        const Graph ga = generate_er(n, std::min(0.5, 8.0 / n), derive_seed(seed, n));
        const Graph gb = generate_er(n, std::min(0.5, 8.0 / n), derive_seed(seed, n + 1));
        const MmSpace a = to_mm_space(ga), b = to_mm_space(gb);
        sliced_gw_cost(a, b, slices);  // warm-up: page in working memory before timing
        double cost = 0.0;
        double dt = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 3; ++rep) {  // min over repeats rejects scheduler spikes
            const auto t0 = std::chrono::steady_clock::now();
            cost = sliced_gw_cost(a, b, slices);
            dt = std::min(dt, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                  .count());
        }
        if (os) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%d,%.6f\n", n, dt);
            os << buf;
        }
        std::printf("  n=%-6d %.4fs cost %.6f%s\n", n, dt, cost,
                    prev > 0 ? (" x" + std::to_string(dt / prev)).c_str() : "");
        prev = dt;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
    // keep large Eigen temporaries on the main heap so repeated solver calls
    // reuse already-faulted pages instead of mmap/munmap churn
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
    CLI::App app{"structural-coordinate graph foundation model toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags win over file values");

    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (default: SCGFM_THREADS or 1)");

    std::string data, format = "json", out, ckpt, metrics, solver_name = "entropic";
    std::string out_format = "jsonl", emb_path, eps_csv = "0,0.3,0.7", sizes_csv = "500,1000,2000,4000";
    std::uint64_t seed = 42;
    int pairs = 200, ways = 2, shots = 5, queries = 50, runs = 50;
    int count = 200, n_min = 10, n_max = 20, limit = 12;
    bool no_standardize = false;
    TrainConfig cfg;

    auto* c_pre = app.add_subcommand("pretrain", "train the base dictionary and decoder");
    c_pre->add_option("--data", data, "corpus path (file for json, dir for tu)")->required();
    c_pre->add_option("--format", format, "json|tu")->capture_default_str();
    c_pre->add_option("--out", out, "checkpoint output path")->required();
    c_pre->add_option("--metrics", metrics, "JSON-lines metrics output path");
    add_train_flags(c_pre, cfg);

    auto* c_emb = app.add_subcommand("embed", "embed a dataset with a frozen checkpoint");
    c_emb->add_option("--data", data)->required();
    c_emb->add_option("--format", format, "json|tu")->capture_default_str();
    c_emb->add_option("--checkpoint", ckpt)->required();
    c_emb->add_option("--out", out)->required();
    c_emb->add_option("--out-format", out_format, "jsonl|bin")->capture_default_str();
    c_emb->add_option("--solver", solver_name, "entropic|sliced|exact")->capture_default_str();
    c_emb->add_option("--seed", seed)->capture_default_str();

    auto* c_eval = app.add_subcommand("eval", "few-shot prototypical evaluation");
    c_eval->add_option("--embeddings", emb_path, "embedding file (.jsonl or .bin)")->required();
    c_eval->add_option("--out", out, "per-run results JSON-lines");
    c_eval->add_option("--ways", ways)->capture_default_str();
    c_eval->add_option("--shots", shots)->capture_default_str();
    c_eval->add_option("--queries", queries)->capture_default_str();
    c_eval->add_option("--runs", runs)->capture_default_str();
    c_eval->add_option("--seed", seed)->capture_default_str();
    c_eval->add_flag("--no-standardize", no_standardize, "disable support z-scoring");

    auto* c_gen = app.add_subcommand("gen", "generate the synthetic two-class corpus");
    c_gen->add_option("--out", out)->required();
    c_gen->add_option("--count", count)->capture_default_str();
    c_gen->add_option("--n-min", n_min)->capture_default_str();
    c_gen->add_option("--n-max", n_max)->capture_default_str();
    c_gen->add_option("--seed", seed)->capture_default_str();

    auto* c_diag = app.add_subcommand("diagnose", "representation diagnostics");
    c_diag->require_subcommand(1);

    auto* d_iso = c_diag->add_subcommand("isometry", "GW vs latent distance correlation");
    d_iso->add_option("--data", data)->required();
    d_iso->add_option("--format", format)->capture_default_str();
    d_iso->add_option("--checkpoint", ckpt)->required();
    d_iso->add_option("--pairs", pairs)->capture_default_str();
    d_iso->add_option("--seed", seed)->capture_default_str();
    d_iso->add_option("--out", out, "pair table CSV");

    auto* d_sgw = c_diag->add_subcommand("sgw-corr", "sliced vs entropic cost correlation");
    d_sgw->add_option("--data", data)->required();
    d_sgw->add_option("--format", format)->capture_default_str();
    d_sgw->add_option("--pairs", pairs)->capture_default_str();
    d_sgw->add_option("--seed", seed)->capture_default_str();
    d_sgw->add_option("--out", out, "pair table CSV");

    auto* d_sur = c_diag->add_subcommand("surrogate", "surrogate vs fixed-point barycenter");
    d_sur->add_option("--data", data)->required();
    d_sur->add_option("--format", format)->capture_default_str();
    d_sur->add_option("--checkpoint", ckpt)->required();
    d_sur->add_option("--limit", limit, "max graphs")->capture_default_str();
    d_sur->add_option("--out", out, "per-graph CSV");

    auto* d_rew = c_diag->add_subcommand("rewire", "feature-block drift under edge rewiring");
    d_rew->add_option("--data", data)->required();
    d_rew->add_option("--format", format)->capture_default_str();
    d_rew->add_option("--checkpoint", ckpt)->required();
    d_rew->add_option("--eps", eps_csv, "comma-separated rewiring rates")->capture_default_str();
    d_rew->add_option("--count", count, "max graphs")->capture_default_str();
    d_rew->add_option("--seed", seed)->capture_default_str();
    d_rew->add_option("--out", out, "CSV output");

    auto* d_fis = c_diag->add_subcommand("fisher", "per-component separability ratios");
    d_fis->add_option("--embeddings", emb_path)->required();
    d_fis->add_option("--out", out, "JSON-lines output");

    auto* d_gc = c_diag->add_subcommand("gradcheck", "finite-difference gradient check");
    d_gc->add_option("--seed", seed)->capture_default_str();

    auto* d_bench = c_diag->add_subcommand("bench", "sliced GW wall-time scaling");
    d_bench->add_option("--sizes", sizes_csv, "comma-separated node counts")->capture_default_str();
    d_bench->add_option("--seed", seed)->capture_default_str();
    d_bench->add_option("--out", out, "CSV output");

    CLI11_PARSE(app, argc, argv);

    if (threads <= 0) {
        const char* env = std::getenv("SCGFM_THREADS");
        threads = env ? std::atoi(env) : 1;
    }
    set_threads(threads);

    try {
        if (*c_pre) return run_pretrain(data, format, out, metrics, cfg);
        if (*c_emb) return run_embed(data, format, ckpt, out, out_format, solver_name, seed);
        if (*c_eval) return run_eval(emb_path, out, ways, shots, queries, runs, seed, !no_standardize);
        if (*c_gen) return run_gen(out, count, n_min, n_max, seed);
        if (*d_iso) return diag_isometry(data, format, ckpt, pairs, seed, out);
        if (*d_sgw) return diag_sgw_corr(data, format, pairs, seed, out);
        if (*d_sur) return diag_surrogate(data, format, ckpt, limit, out);
        if (*d_rew) return diag_rewire(data, format, ckpt, eps_csv, count, seed, out);
        if (*d_fis) return diag_fisher(emb_path, out);
        if (*d_gc) return diag_gradcheck(seed);
        if (*d_bench) return diag_bench(sizes_csv, seed, out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "error: no subcommand handled\n");
    return 1;
}
