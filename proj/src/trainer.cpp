#include "scgfm/trainer.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/parallel.hpp"
#include "scgfm/rng.hpp"
#include "scgfm/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace scgfm {

// ============================================================ config

void TrainConfig::validate() const {
    if (k < 1 || m_nodes < 2 || slices < 1 || epochs < 0 || batch_size < 1 || decoder_hidden < 1)
        throw integrity_error("train config: bad sizes");
    if (temperature <= 0.0 || learning_rate <= 0.0 || alpha < 0.0 || beta < 0.0 || margin <= 0.0)
        throw integrity_error("train config: bad coefficients");
    if (solver != "entropic" && solver != "sliced")
        throw integrity_error("train config: solver must be entropic or sliced");
    if (optimizer != "adam" && optimizer != "sgd")
        throw integrity_error("train config: optimizer must be adam or sgd");
}

GwSolver TrainConfig::make_solver() const {
    if (solver == "sliced") {
        auto s = std::make_shared<SliceSet>(make_slices(slices, 8, derive_seed(seed, 3)));
        return GwSolver::make(GwSolver::sliced, 0.01, std::move(s));
    }
    return GwSolver::make(GwSolver::entropic, 0.01);
}

// ============================================================ checkpoint IO

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "") << fmt_g17(m(i, j));
        os << "\n";
    }
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) os << (i ? " " : "") << fmt_g17(v[i]);
    os << "\n";
}

std::string next_line(std::istream& is, const char* what) {
    std::string line;
    if (!std::getline(is, line)) throw parse_error(std::string("checkpoint truncated at ") + what);
    return line;
}

void read_matrix(std::istream& is, Eigen::MatrixXd& m, int rows, int cols, const char* what) {
    m.resize(rows, cols);
    for (int i = 0; i < rows; ++i) {
        std::istringstream ls(next_line(is, what));
        for (int j = 0; j < cols; ++j)
            if (!(ls >> m(i, j))) throw parse_error(std::string("bad matrix row in ") + what);
    }
}

void read_vector(std::istream& is, Eigen::VectorXd& v, int n, const char* what) {
    v.resize(n);
    std::istringstream ls(next_line(is, what));
    for (int i = 0; i < n; ++i)
        if (!(ls >> v[i])) throw parse_error(std::string("bad vector in ") + what);
}

void expect_tag(std::istringstream& ls, const char* tag) {
    std::string got;
    ls >> got;
    if (got != tag) throw parse_error("expected '" + std::string(tag) + "', got '" + got + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write " + path);
    os << ck.version << "\n";
    const TrainConfig& c = ck.config;
    os << "config k " << c.k << "\n";
    os << "config m_nodes " << c.m_nodes << "\n";
    os << "config slices " << c.slices << "\n";
    os << "config temperature " << fmt_g17(c.temperature) << "\n";
    os << "config alpha " << fmt_g17(c.alpha) << "\n";
    os << "config beta " << fmt_g17(c.beta) << "\n";
    os << "config margin " << fmt_g17(c.margin) << "\n";
    os << "config epochs " << c.epochs << "\n";
    os << "config batch_size " << c.batch_size << "\n";
    os << "config learning_rate " << fmt_g17(c.learning_rate) << "\n";
    os << "config seed " << c.seed << "\n";
    os << "config solver " << c.solver << "\n";
    os << "config stop_grad_weights " << (c.stop_grad_weights ? 1 : 0) << "\n";
    os << "config optimizer " << c.optimizer << "\n";
    os << "config decoder_hidden " << c.decoder_hidden << "\n";
    os << "feature_dim " << ck.feature_dim << " degree_bins " << kDegreeBins << " clustering_bins "
       << kClusteringBins << " motifs triangle,c4,c5 vec_order row_major\n";
    os << "dict " << ck.dict.k() << " " << ck.dict.m() << " " << fmt_g17(ck.dict.temperature) << " "
       << fmt_g17(ck.dict.margin) << "\n";
    for (int b = 0; b < ck.dict.k(); ++b) {
        os << "base " << b << "\n";
        write_matrix(os, ck.dict.bases[b]);
    }
    os << "decoder " << ck.decoder.hidden_dim() << " " << ck.decoder.input_dim() << " "
       << ck.decoder.output_dim() << "\n";
    os << "w1\n";
    write_matrix(os, ck.decoder.w1);
    os << "b1\n";
    write_vector(os, ck.decoder.b1);
    os << "w2\n";
    write_matrix(os, ck.decoder.w2);
    os << "b2\n";
    write_vector(os, ck.decoder.b2);
    os << "log " << ck.log.size() << "\n";
    for (const auto& r : ck.log)
        os << "log_row " << r.epoch << " " << fmt_g17(r.gw) << " " << fmt_g17(r.rec) << " "
           << fmt_g17(r.div) << " " << fmt_g17(r.total) << "\n";
    os << "end\n";
    if (!os) throw io_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot read " + path);
    Checkpoint ck;
    const std::string version = next_line(is, "version");
    if (version != ck.version)
        throw parse_error("unsupported checkpoint version '" + version + "'");

    TrainConfig& c = ck.config;
    auto cfg_line = [&](const char* name, auto& field) {
        std::istringstream ls(next_line(is, name));
        expect_tag(ls, "config");
        expect_tag(ls, name);
        if (!(ls >> field)) throw parse_error(std::string("bad config value for ") + name);
    };
    cfg_line("k", c.k);
    cfg_line("m_nodes", c.m_nodes);
    cfg_line("slices", c.slices);
    cfg_line("temperature", c.temperature);
    cfg_line("alpha", c.alpha);
    cfg_line("beta", c.beta);
    cfg_line("margin", c.margin);
    cfg_line("epochs", c.epochs);
    cfg_line("batch_size", c.batch_size);
    cfg_line("learning_rate", c.learning_rate);
    cfg_line("seed", c.seed);
    cfg_line("solver", c.solver);
    int sgw = 0;
    cfg_line("stop_grad_weights", sgw);
    c.stop_grad_weights = sgw != 0;
    cfg_line("optimizer", c.optimizer);
    cfg_line("decoder_hidden", c.decoder_hidden);
    {
        std::istringstream ls(next_line(is, "feature_dim"));
        expect_tag(ls, "feature_dim");
        if (!(ls >> ck.feature_dim)) throw parse_error("bad feature_dim");
        if (ck.feature_dim != kStatDim)
            throw parse_error("checkpoint feature_dim does not match this build");
    }
    int k = 0, m = 0;
    {
        std::istringstream ls(next_line(is, "dict"));
        expect_tag(ls, "dict");
        if (!(ls >> k >> m >> ck.dict.temperature >> ck.dict.margin))
            throw parse_error("bad dict header");
    }
    ck.dict.base_measure = Eigen::VectorXd::Constant(m, 1.0 / m);
    ck.dict.bases.resize(k);
    for (int b = 0; b < k; ++b) {
        std::istringstream ls(next_line(is, "base"));
        expect_tag(ls, "base");
        int idx = -1;
        if (!(ls >> idx) || idx != b) throw parse_error("bad base index");
        read_matrix(is, ck.dict.bases[b], m, m, "base");
    }
    int hidden = 0, dk = 0, dr = 0;
    {
        std::istringstream ls(next_line(is, "decoder"));
        expect_tag(ls, "decoder");
        if (!(ls >> hidden >> dk >> dr)) throw parse_error("bad decoder header");
    }
    if (next_line(is, "w1") != "w1") throw parse_error("expected w1");
    read_matrix(is, ck.decoder.w1, hidden, dk, "w1");
    if (next_line(is, "b1") != "b1") throw parse_error("expected b1");
    read_vector(is, ck.decoder.b1, hidden, "b1");
    if (next_line(is, "w2") != "w2") throw parse_error("expected w2");
    read_matrix(is, ck.decoder.w2, dr, hidden, "w2");
    if (next_line(is, "b2") != "b2") throw parse_error("expected b2");
    read_vector(is, ck.decoder.b2, dr, "b2");
    std::size_t rows = 0;
    {
        std::istringstream ls(next_line(is, "log"));
        expect_tag(ls, "log");
        if (!(ls >> rows)) throw parse_error("bad log count");
    }
    ck.log.resize(rows);
    for (auto& r : ck.log) {
        std::istringstream ls(next_line(is, "log_row"));
        expect_tag(ls, "log_row");
        if (!(ls >> r.epoch >> r.gw >> r.rec >> r.div >> r.total))
            throw parse_error("bad log row");
    }
    if (next_line(is, "end") != "end") throw parse_error("expected end marker");
    ck.dict.validate();
    ck.decoder.validate();
    return ck;
}

// ============================================================ total loss

TotalLossResult total_loss(const std::vector<TrainItem>& batch, const BaseDictionary& dict,
                           const Decoder& dec, const TrainConfig& cfg) {
    if (batch.empty()) throw integrity_error("total_loss: empty batch");
    dict.validate();
    dec.validate();
    const int bsz = static_cast<int>(batch.size());
    const int k = dict.k();
    const double inv_b = 1.0 / bsz;
    const GwSolver solver = cfg.make_solver();

    struct Slot {
        double gw = 0.0;
        double rec = 0.0;
        std::vector<Eigen::MatrixXd> base_grads;
        DecoderGrads dec_grads;
    };
    std::vector<Slot> slots(bsz);

    parallel_for(bsz, [&](int i) {
        const TrainItem& item = batch[i];
        Slot& s = slots[i];
        CoordinateResult coords = structural_coordinates(item.space, dict, solver);
        const Eigen::VectorXd& w = coords.weights;

        const Eigen::MatrixXd sur = linear_surrogate(dict, w);
        const MmSpace sur_space = mm_from_dense(sur, dict.base_measure);
        const GwResult rgw = solver.solve(item.space, sur_space);
        s.gw = std::max(0.0, rgw.cost);
        const Eigen::MatrixXd g_sur = gw_gradient_b(item.space, sur_space, rgw.coupling);

        const Eigen::VectorXd decoded = decode(dec, w);
        const Eigen::VectorXd resid = decoded - item.target;
        s.rec = resid.squaredNorm() / resid.size();
        const Eigen::VectorXd upstream = (2.0 / resid.size()) * resid;
        s.dec_grads = decode_backward(dec, w, upstream);

        s.base_grads.assign(k, Eigen::MatrixXd());
        for (int b = 0; b < k; ++b) s.base_grads[b] = inv_b * w[b] * g_sur;

        if (!cfg.stop_grad_weights) {
            // total derivative wrt w: surrogate path of L_gw plus the decoder
            // input path of alpha * L_rec, then back through the softmax and
            // the envelope gradients of each delta
            Eigen::VectorXd dldw(k);
            for (int b = 0; b < k; ++b)
                dldw[b] = inv_b * (g_sur.array() * dict.bases[b].array()).sum();
            dldw += (cfg.alpha * inv_b) * s.dec_grads.input;
            const double mix = dldw.dot(w);
            for (int b = 0; b < k; ++b) {
                const double dl_ddelta = -(w[b] / dict.temperature) * (dldw[b] - mix);
                if (dl_ddelta == 0.0) continue;
                const Eigen::MatrixXd g_b =
                    gw_gradient_b(item.space, dict.base_space(b), coords.couplings[b]);
                s.base_grads[b] += dl_ddelta * g_b;
            }
        }
    });

    TotalLossResult out;
    out.base_grads.assign(k, Eigen::MatrixXd::Zero(dict.m(), dict.m()));
    out.decoder_grads = DecoderGrads::zero(dec);
    for (const Slot& s : slots) {
        out.gw += s.gw * inv_b;
        out.rec += s.rec * inv_b;
        for (int b = 0; b < k; ++b) out.base_grads[b] += s.base_grads[b];
        out.decoder_grads.accumulate(s.dec_grads, cfg.alpha * inv_b);
    }
    const DiversityResult div = diversity_loss(dict);
    out.div = div.loss;
    for (int b = 0; b < k; ++b) out.base_grads[b] += cfg.beta * div.gradients[b];
    out.total = out.gw + cfg.alpha * out.rec + cfg.beta * out.div;
    if (!std::isfinite(out.total)) throw numerical_error("total_loss: non-finite loss");
    return out;
}

// ============================================================ optimizer

namespace {

struct Optimizer {
    std::string kind;
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long t = 0;
    std::vector<Eigen::MatrixXd> mb, vb;  // base moments
    DecoderGrads md, vd;                  // decoder moments (reusing the container)

    Optimizer(const TrainConfig& cfg, const BaseDictionary& dict, const Decoder& dec)
        : kind(cfg.optimizer), lr(cfg.learning_rate) {
        mb.assign(dict.k(), Eigen::MatrixXd::Zero(dict.m(), dict.m()));
        vb = mb;
        md = DecoderGrads::zero(dec);
        vd = DecoderGrads::zero(dec);
    }

    template <typename T>
    void adam_update(T& param, const T& grad, T& m, T& v, double bc1, double bc2) {
        m = beta1 * m + (1.0 - beta1) * grad;
        v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }

    void step(BaseDictionary& dict, Decoder& dec, const TotalLossResult& g) {
        ++t;
        if (kind == "sgd") {
            for (int b = 0; b < dict.k(); ++b) dict.bases[b] -= lr * g.base_grads[b];
            dec.w1 -= lr * g.decoder_grads.w1;
            dec.b1 -= lr * g.decoder_grads.b1;
            dec.w2 -= lr * g.decoder_grads.w2;
            dec.b2 -= lr * g.decoder_grads.b2;
        } else {
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
            for (int b = 0; b < dict.k(); ++b)
                adam_update(dict.bases[b], g.base_grads[b], mb[b], vb[b], bc1, bc2);
            adam_update(dec.w1, g.decoder_grads.w1, md.w1, vd.w1, bc1, bc2);
            adam_update(dec.b1, g.decoder_grads.b1, md.b1, vd.b1, bc1, bc2);
            adam_update(dec.w2, g.decoder_grads.w2, md.w2, vd.w2, bc1, bc2);
            adam_update(dec.b2, g.decoder_grads.b2, md.b2, vd.b2, bc1, bc2);
        }
        for (int b = 0; b < dict.k(); ++b) dict.bases[b] = project_constraints(dict.bases[b]);
    }
};

}  // namespace

// ============================================================ pretrain

Checkpoint pretrain(const std::vector<Graph>& corpus, const TrainConfig& cfg,
                    const MetricsSink& sink) {
    cfg.validate();
    if (corpus.empty()) throw integrity_error("pretrain: empty corpus");

    std::vector<TrainItem> items(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        corpus[i].validate();
        items[i].space = to_mm_space(corpus[i]);
        items[i].target = feature_extract(corpus[i]).values;
    }

    Checkpoint ck;
    ck.config = cfg;
    ck.dict = init_dictionary(cfg.k, cfg.m_nodes, derive_seed(cfg.seed, 1));
    ck.dict.temperature = cfg.temperature;
    ck.dict.margin = cfg.margin;
    ck.decoder = init_decoder(cfg.k, cfg.decoder_hidden, kStatDim, derive_seed(cfg.seed, 2));

    Optimizer opt(cfg, ck.dict, ck.decoder);
    std::vector<int> order(items.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        EpochRecord rec;
        rec.epoch = epoch;
        int seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<TrainItem> batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(items[order[i]]);
            TotalLossResult res;
            try {
                res = total_loss(batch, ck.dict, ck.decoder, cfg);
            } catch (const error& e) {
                throw error("pretrain: epoch " + std::to_string(epoch) + ", batch at " +
                            std::to_string(start) + ": " + e.what());
            }
            opt.step(ck.dict, ck.decoder, res);
            const int bsz = static_cast<int>(batch.size());
            rec.gw += res.gw * bsz;
            rec.rec += res.rec * bsz;
            rec.div += res.div * bsz;
            rec.total += res.total * bsz;
            seen += bsz;
        }
        rec.gw /= seen;
        rec.rec /= seen;
        rec.div /= seen;
        rec.total /= seen;
        ck.log.push_back(rec);
        if (sink) sink(rec);
    }
    return ck;
}

// ============================================================ gradient check

GradCheckReport grad_check(const TrainConfig& cfg, std::uint64_t seed) {
    TrainConfig small = cfg;
    small.k = std::min(cfg.k, 3);
    small.m_nodes = std::min(cfg.m_nodes, 5);
    small.validate();

    BaseDictionary dict = init_dictionary(small.k, small.m_nodes, derive_seed(seed, 1));
    dict.temperature = small.temperature;
    dict.margin = small.margin;
    Decoder dec = init_decoder(small.k, std::min(small.decoder_hidden, 16), kStatDim,
                               derive_seed(seed, 2));

    const std::vector<Graph> graphs = two_class_corpus(4, 6, 8, derive_seed(seed, 3));
    std::vector<TrainItem> batch(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        batch[i].space = to_mm_space(graphs[i]);
        batch[i].target = feature_extract(graphs[i]).values;
    }

    const TotalLossResult base_res = total_loss(batch, dict, dec, small);
    GradCheckReport report;
    const double h = 1e-5;

    // envelope component: d(L_gw + alpha L_rec)/d bases, i.e. everything the
    // analytic base gradients carry except the (exact) diversity part
    const DiversityResult div0 = diversity_loss(dict);
    auto gw_rec_value = [&](const BaseDictionary& d) {
        const TotalLossResult r = total_loss(batch, d, dec, small);
        return r.gw + small.alpha * r.rec;
    };
    for (int b = 0; b < dict.k(); ++b)
        for (int i = 0; i < dict.m(); ++i)
            for (int j = i + 1; j < dict.m(); ++j) {
                BaseDictionary dp = dict, dm = dict;
                dp.bases[b](i, j) += h;
                dp.bases[b](j, i) += h;
                dm.bases[b](i, j) -= h;
                dm.bases[b](j, i) -= h;
                const double fd = (gw_rec_value(dp) - gw_rec_value(dm)) / (2.0 * h);
                const double an = (base_res.base_grads[b](i, j) + base_res.base_grads[b](j, i)) -
                                  small.beta * (div0.gradients[b](i, j) + div0.gradients[b](j, i));
                const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
                report.gw_max_rel = std::max(report.gw_max_rel, rel);
            }

    // diversity component: exact gradients of beta * L_div wrt bases
    auto div_value = [&](const BaseDictionary& d) { return small.beta * diversity_loss(d).loss; };
    for (int b = 0; b < dict.k(); ++b)
        for (int i = 0; i < dict.m(); ++i)
            for (int j = i + 1; j < dict.m(); ++j) {
                BaseDictionary dp = dict, dm = dict;
                dp.bases[b](i, j) += h;
                dp.bases[b](j, i) += h;
                dm.bases[b](i, j) -= h;
                dm.bases[b](j, i) -= h;
                const double fd = (div_value(dp) - div_value(dm)) / (2.0 * h);
                const double an =
                    small.beta * (div0.gradients[b](i, j) + div0.gradients[b](j, i));
                const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
                report.div_max_rel = std::max(report.div_max_rel, rel);
            }

    // reconstruction component: exact chain to the decoder parameters, with
    // the coordinates held at their solver values
    std::vector<Eigen::VectorXd> ws(batch.size());
    {
        const GwSolver solver = small.make_solver();
        for (std::size_t i = 0; i < batch.size(); ++i)
            ws[i] = structural_coordinates(batch[i].space, dict, solver).weights;
    }
    auto rec_value = [&](const Decoder& d) {
        double acc = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Eigen::VectorXd r = decode(d, ws[i]) - batch[i].target;
            acc += r.squaredNorm() / r.size();
        }
        return small.alpha * acc / batch.size();
    };
    auto check_param = [&](Eigen::MatrixXd Decoder::*field, const Eigen::MatrixXd& analytic) {
        for (int i = 0; i < analytic.rows(); ++i)
            for (int j = 0; j < analytic.cols(); ++j) {
                Decoder dp = dec, dm = dec;
                (dp.*field)(i, j) += h;
                (dm.*field)(i, j) -= h;
                const double fd = (rec_value(dp) - rec_value(dm)) / (2.0 * h);
                const double an = analytic(i, j);
                const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
                report.rec_max_rel = std::max(report.rec_max_rel, rel);
            }
    };
    auto check_bias = [&](Eigen::VectorXd Decoder::*field, const Eigen::VectorXd& analytic) {
        for (int i = 0; i < analytic.size(); ++i) {
            Decoder dp = dec, dm = dec;
            (dp.*field)[i] += h;
            (dm.*field)[i] -= h;
            const double fd = (rec_value(dp) - rec_value(dm)) / (2.0 * h);
            const double an = analytic[i];
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            report.rec_max_rel = std::max(report.rec_max_rel, rel);
        }
    };
    check_param(&Decoder::w1, base_res.decoder_grads.w1);
    check_bias(&Decoder::b1, base_res.decoder_grads.b1);
    check_param(&Decoder::w2, base_res.decoder_grads.w2);
    check_bias(&Decoder::b2, base_res.decoder_grads.b2);

    report.pass = report.rec_max_rel < 1e-4 && report.div_max_rel < 1e-4 &&
                  report.gw_max_rel < 5e-2;
    return report;
}

// ============================================================ surrogate study

SurrogateReport surrogate_vs_barycenter(const std::vector<MmSpace>& corpus,
                                        const BaseDictionary& dict) {
    dict.validate();
    if (corpus.empty()) throw integrity_error("surrogate_vs_barycenter: empty corpus");
    const int m = dict.m();
    const int k = dict.k();
    const auto slices = make_slices(50, 8, 17);
    const GwSolver solver = GwSolver::make(GwSolver::entropic, 0.01);

    SurrogateReport rep;
    for (const MmSpace& g : corpus) {
        const CoordinateResult coords = structural_coordinates(g, dict, solver);
        SurrogateReportRow row;

        const auto t0 = std::chrono::steady_clock::now();
        const Eigen::MatrixXd sur = linear_surrogate(dict, coords.weights);
        row.surrogate_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                    .count();
        row.surrogate_error = sliced_gw(g, mm_from_dense(sur, dict.base_measure), slices).cost;

        // fixed-point GW barycenter of the bases under the coordinate weights,
        // seeded at the surrogate; 20 alternating coupling/structure updates
        const auto t1 = std::chrono::steady_clock::now();
        Eigen::MatrixXd bary = sur;
        for (int it = 0; it < 20; ++it) {
            Eigen::MatrixXd next = Eigen::MatrixXd::Zero(m, m);
            const MmSpace bspace = mm_from_dense(bary, dict.base_measure);
            for (int b = 0; b < k; ++b) {
                const GwResult r = solver.solve(bspace, dict.base_space(b));
                next += coords.weights[b] * static_cast<double>(m) * static_cast<double>(m) *
                        (r.coupling.plan * dict.bases[b] * r.coupling.plan.transpose());
            }
            bary = 0.5 * (next + next.transpose());
        }
        row.barycenter_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
                                     .count();
        row.barycenter_error = sliced_gw(g, mm_from_dense(bary, dict.base_measure), slices).cost;

        rep.rows.push_back(row);
        rep.surrogate_mean += row.surrogate_error;
        rep.barycenter_mean += row.barycenter_error;
        rep.surrogate_mean_seconds += row.surrogate_seconds;
        rep.barycenter_mean_seconds += row.barycenter_seconds;
    }
    const double n = static_cast<double>(rep.rows.size());
    rep.surrogate_mean /= n;
    rep.barycenter_mean /= n;
    rep.surrogate_mean_seconds /= n;
    rep.barycenter_mean_seconds /= n;
    return rep;
}

}  // namespace scgfm
