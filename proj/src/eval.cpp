#include "scgfm/eval.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace scgfm {

// ============================================================ episodes

std::vector<Episode> sample_episodes(const std::vector<Embedding>& pool, int n_way, int k_shot,
                                     int queries, int runs, std::uint64_t seed) {
    if (n_way < 2 || k_shot < 1 || queries < 1 || runs < 1)
        throw integrity_error("sample_episodes: bad parameters");
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
        if (pool[i].label < 0) continue;
        by_class[pool[i].label].push_back(i);
    }
    std::vector<int> eligible;
    for (const auto& [cls, members] : by_class)
        if (static_cast<int>(members.size()) >= k_shot + queries) eligible.push_back(cls);
    if (static_cast<int>(eligible.size()) < n_way) {
        std::string have;
        for (const auto& [cls, members] : by_class)
            have += " class " + std::to_string(cls) + ":" + std::to_string(members.size());
        throw integrity_error("sample_episodes: need " + std::to_string(n_way) + " classes with >= " +
                              std::to_string(k_shot + queries) + " items, have" + have);
    }

    std::vector<Episode> out;
    out.reserve(runs);
    for (int run = 0; run < runs; ++run) {
        const std::uint64_t ep_seed = derive_seed(seed, static_cast<std::uint64_t>(run));
        Rng rng(ep_seed);
        std::vector<int> classes = eligible;
        rng.shuffle(classes);
        classes.resize(n_way);
        std::sort(classes.begin(), classes.end());

        Episode ep;
        ep.n_way = n_way;
        ep.k_shot = k_shot;
        ep.queries_per_class = queries;
        ep.seed = ep_seed;
        for (const int cls : classes) {
            std::vector<int> members = by_class[cls];
            rng.shuffle(members);
            for (int s = 0; s < k_shot; ++s)
                ep.support.emplace_back(pool[members[s]].to_vector(), cls);
            for (int q = 0; q < queries; ++q)
                ep.query.emplace_back(pool[members[k_shot + q]].to_vector(), cls);
        }
        out.push_back(std::move(ep));
    }
    return out;
}

// ============================================================ prototypes

ProtoResult proto_classify(const Episode& ep, bool standardize) {
    if (ep.support.empty() || ep.query.empty()) throw integrity_error("proto_classify: empty episode");
    const int dim = static_cast<int>(ep.support[0].first.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd std_dev = Eigen::VectorXd::Ones(dim);
    if (standardize) {
        for (const auto& [v, cls] : ep.support) mean += v;
        mean /= static_cast<double>(ep.support.size());
        Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
        for (const auto& [v, cls] : ep.support) var += (v - mean).cwiseAbs2();
        var /= static_cast<double>(ep.support.size());
        std_dev = var.cwiseSqrt().cwiseMax(1e-8);
    }
    auto norm = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        if (!standardize) return v;
        return (v - mean).cwiseQuotient(std_dev);
    };

    std::map<int, std::pair<Eigen::VectorXd, int>> protos;  // class -> (sum, count)
    for (const auto& [v, cls] : ep.support) {
        auto it = protos.find(cls);
        if (it == protos.end())
            protos.emplace(cls, std::make_pair(norm(v), 1));
        else {
            it->second.first += norm(v);
            it->second.second += 1;
        }
    }
    std::vector<std::pair<int, Eigen::VectorXd>> centers;  // sorted by class index
    for (auto& [cls, acc] : protos) centers.emplace_back(cls, acc.first / acc.second);

    ProtoResult res;
    res.predictions.reserve(ep.query.size());
    int correct = 0;
    for (const auto& [v, cls] : ep.query) {
        const Eigen::VectorXd q = norm(v);
        int best_cls = centers[0].first;
        double best_d = (q - centers[0].second).squaredNorm();
        for (std::size_t c = 1; c < centers.size(); ++c) {
            const double d = (q - centers[c].second).squaredNorm();
            if (d < best_d) {  // strict: ties keep the lower class index
                best_d = d;
                best_cls = centers[c].first;
            }
        }
        res.predictions.push_back(best_cls);
        if (best_cls == cls) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(ep.query.size());
    return res;
}

// ============================================================ CKA / Pearson

double cka_linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.rows() != y.rows()) throw integrity_error("cka_linear: row count mismatch");
    if (x.rows() < 2) throw integrity_error("cka_linear: need at least 2 rows");
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
    const double cross = (yc.transpose() * xc).squaredNorm();
    const double nx = (xc.transpose() * xc).norm();
    const double ny = (yc.transpose() * yc).norm();
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return cross / (nx * ny);
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size() || x.size() < 2) throw integrity_error("pearson: bad input lengths");
    const double mx = x.mean(), my = y.mean();
    const Eigen::ArrayXd dx = x.array() - mx, dy = y.array() - my;
    const double sxx = (dx * dx).sum(), syy = (dy * dy).sum();
    if (sxx <= 0.0 || syy <= 0.0) throw numerical_error("pearson: zero variance input");
    return (dx * dy).sum() / std::sqrt(sxx * syy);
}

// ============================================================ isometry

IsometryResult isometry_study(const std::vector<Graph>& graphs, const Checkpoint& ckpt, int pairs,
                              std::uint64_t seed) {
    if (graphs.size() < 2) throw integrity_error("isometry_study: need at least 2 graphs");
    if (pairs < 3) throw integrity_error("isometry_study: need at least 3 pairs");
    const GwSolver solver = GwSolver::make(GwSolver::entropic, 0.01);
    const std::vector<Embedding> embs = embed_corpus(graphs, ckpt, solver);
    std::vector<Eigen::VectorXd> zs(embs.size());
    for (std::size_t i = 0; i < embs.size(); ++i) zs[i] = embs[i].to_vector();
    std::vector<MmSpace> spaces(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) spaces[i] = to_mm_space(graphs[i]);

    Rng rng(seed);
    IsometryResult res;
    res.table.reserve(pairs);
    Eigen::VectorXd gw(pairs), latent(pairs);
    const int n = static_cast<int>(graphs.size());
    for (int p = 0; p < pairs; ++p) {
        int i = static_cast<int>(rng.uniform_int(0, n - 1));
        int j = static_cast<int>(rng.uniform_int(0, n - 2));
        if (j >= i) ++j;
        IsometryRow row;
        row.i = i;
        row.j = j;
        // reference distance: exact oracle when eligible, else entropic
        const MmSpace& a = spaces[i];
        const MmSpace& b = spaces[j];
        const double u = 1.0 / std::max(1, a.size());
        const bool exact_ok = a.size() == b.size() && a.size() <= 8 &&
                              (a.measure.array() - u).abs().maxCoeff() <= 1e-9 &&
                              (b.measure.array() - u).abs().maxCoeff() <= 1e-9;
        row.gw_distance = exact_ok ? exact_gw(a, b).cost : entropic_gw(a, b, 0.01).cost;
        row.latent_distance = (zs[i] - zs[j]).norm();
        gw[p] = row.gw_distance;
        latent[p] = row.latent_distance;
        res.table.push_back(row);
    }

    res.rho = pearson(gw, latent);
    // permutation test: shuffle one side, count coefficients at least as large
    Rng perm_rng(derive_seed(seed, 0x9e37));
    std::vector<int> idx(pairs);
    std::iota(idx.begin(), idx.end(), 0);
    const int shuffles = 10000;
    int at_least = 0;
    Eigen::VectorXd permuted(pairs);
    for (int s = 0; s < shuffles; ++s) {
        perm_rng.shuffle(idx);
        for (int p = 0; p < pairs; ++p) permuted[p] = latent[idx[p]];
        if (std::abs(pearson(gw, permuted)) >= std::abs(res.rho)) ++at_least;
    }
    res.p_value = static_cast<double>(at_least + 1) / static_cast<double>(shuffles + 1);
    return res;
}

// ============================================================ Fisher ratio

double fisher_ratio(const std::vector<Embedding>& embs, FisherComponent component) {
    if (embs.size() < 4) throw integrity_error("fisher_ratio: need at least 4 samples");
    auto block = [&](const Embedding& e) -> Eigen::VectorXd {
        switch (component) {
            case FisherComponent::coords: return e.coords;
            case FisherComponent::decoded: return e.decoded;
            case FisherComponent::features: {
                Eigen::VectorXd v(e.features.size());
                int at = 0;
                for (int i = 0; i < e.features.rows(); ++i)
                    for (int j = 0; j < e.features.cols(); ++j) v[at++] = e.features(i, j);
                return v;
            }
            case FisherComponent::full: return e.to_vector();
        }
        throw integrity_error("fisher_ratio: unknown component");
    };

    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(embs.size()); ++i) {
        if (embs[i].label < 0) throw integrity_error("fisher_ratio: unlabeled embedding");
        by_class[embs[i].label].push_back(i);
    }
    if (by_class.size() < 2) throw integrity_error("fisher_ratio: need at least 2 classes");
    for (const auto& [cls, members] : by_class)
        if (members.size() < 2)
            throw integrity_error("fisher_ratio: class " + std::to_string(cls) +
                                  " has fewer than 2 samples");

    const int dim = static_cast<int>(block(embs[0]).size());
    Eigen::VectorXd global = Eigen::VectorXd::Zero(dim);
    std::map<int, Eigen::VectorXd> means;
    for (const auto& [cls, members] : by_class) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
        for (const int i : members) m += block(embs[i]);
        m /= static_cast<double>(members.size());
        means[cls] = m;
        global += m * static_cast<double>(members.size());
    }
    global /= static_cast<double>(embs.size());

    double s_w = 0.0, s_b = 0.0;
    for (const auto& [cls, members] : by_class) {
        for (const int i : members) s_w += (block(embs[i]) - means[cls]).squaredNorm();
        s_b += members.size() * (means[cls] - global).squaredNorm();
    }
    s_w /= static_cast<double>(embs.size());
    s_b /= static_cast<double>(embs.size());
    return s_b / std::max(s_w, 1e-12);
}

}  // namespace scgfm
