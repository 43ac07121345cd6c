#include "scgfm/embed.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>

namespace scgfm {

using nlohmann::json;

Eigen::VectorXd Embedding::to_vector() const {
    Eigen::VectorXd z(length());
    int at = 0;
    z.segment(at, coords.size()) = coords;
    at += static_cast<int>(coords.size());
    z.segment(at, decoded.size()) = decoded;
    at += static_cast<int>(decoded.size());
    for (int i = 0; i < features.rows(); ++i)
        for (int j = 0; j < features.cols(); ++j) z[at++] = features(i, j);  // row-major
    return z;
}

Eigen::MatrixXd project_features(const Graph& g, const MmSpace& space,
                                 const CoordinateResult& coords, int m) {
    const int n = space.size();
    const int f = static_cast<int>(g.features.cols());
    if (g.features.rows() != g.n) throw integrity_error("project_features: feature shape mismatch");
    if (static_cast<int>(coords.couplings.size()) != coords.weights.size())
        throw integrity_error("project_features: coordinate result inconsistent");

    // features restricted to the coupled support, in support order
    Eigen::MatrixXd x(n, f);
    for (int i = 0; i < n; ++i) x.row(i) = g.features.row(space.index_map[i]);

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, f);
    for (int k = 0; k < coords.weights.size(); ++k) {
        const Eigen::MatrixXd& t = coords.couplings[k].plan;
        if (t.rows() != n || t.cols() != m)
            throw integrity_error("project_features: coupling size mismatch");
        h.noalias() += coords.weights[k] * (static_cast<double>(n) * (t.transpose() * x));
    }
    return h;
}

Embedding embed_graph(const Graph& g, const Checkpoint& ckpt, const GwSolver& solver) {
    g.validate();
    ckpt.dict.validate();
    ckpt.decoder.validate();
    const MmSpace space = to_mm_space(g);
    const CoordinateResult coords = structural_coordinates(space, ckpt.dict, solver);
    Embedding e;
    e.coords = coords.weights;
    e.decoded = decode(ckpt.decoder, coords.weights);
    e.features = project_features(g, space, coords, ckpt.dict.m());
    e.label = g.label;
    return e;
}

std::vector<Embedding> embed_corpus(const std::vector<Graph>& corpus, const Checkpoint& ckpt,
                                    const GwSolver& solver) {
    std::vector<Embedding> out(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), [&](int i) {
        out[i] = embed_graph(corpus[i], ckpt, solver);
        out[i].graph_id = i;
    });
    return out;
}

// ============================================================ JSON-lines IO

void save_embeddings_jsonl(const std::string& path, const std::vector<Embedding>& embs) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write " + path);
    for (const Embedding& e : embs) {
        json rec;
        rec["graph_id"] = e.graph_id;
        rec["label"] = e.label;
        rec["k"] = e.coords.size();
        rec["r"] = e.decoded.size();
        rec["m"] = e.features.rows();
        rec["f"] = e.features.cols();
        const Eigen::VectorXd z = e.to_vector();
        rec["z"] = std::vector<double>(z.data(), z.data() + z.size());
        os << rec.dump() << "\n";
    }
    if (!os) throw io_error("write failed for " + path);
}

namespace {

Embedding unpack(int graph_id, int label, int k, int r, int m, int f,
                 const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != k + r + m * f)
        throw parse_error("embedding length does not match its header");
    Embedding e;
    e.graph_id = graph_id;
    e.label = label;
    e.coords = Eigen::Map<const Eigen::VectorXd>(z.data(), k);
    e.decoded = Eigen::Map<const Eigen::VectorXd>(z.data() + k, r);
    e.features.resize(m, f);
    int at = k + r;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < f; ++j) e.features(i, j) = z[at++];
    return e;
}

}  // namespace

std::vector<Embedding> load_embeddings_jsonl(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot read " + path);
    std::vector<Embedding> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!rec.contains("z") || !rec.contains("k"))
            throw parse_error(path + ":" + std::to_string(lineno) + ": missing embedding fields");
        out.push_back(unpack(rec.value("graph_id", -1), rec.value("label", -1), rec["k"], rec["r"],
                             rec["m"], rec["f"], rec["z"].get<std::vector<double>>()));
    }
    return out;
}

// ============================================================ binary IO

void save_embeddings_binary(const std::string& path, const std::vector<Embedding>& embs) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write " + path);
    int k = 0, r = 0, m = 0, f = 0;
    if (!embs.empty()) {
        k = static_cast<int>(embs[0].coords.size());
        r = static_cast<int>(embs[0].decoded.size());
        m = static_cast<int>(embs[0].features.rows());
        f = static_cast<int>(embs[0].features.cols());
    }
    std::ostringstream header;
    header << "scgfm-embed-bin-v1\n";
    header << "count " << embs.size() << " k " << k << " r " << r << " m " << m << " f " << f
           << "\n";
    os << header.str();
    for (const Embedding& e : embs) {
        if (e.coords.size() != k || e.decoded.size() != r || e.features.rows() != m ||
            e.features.cols() != f)
            throw integrity_error("binary export needs uniform embedding shapes");
        const std::int64_t id = e.graph_id, label = e.label;
        os.write(reinterpret_cast<const char*>(&id), sizeof(id));
        os.write(reinterpret_cast<const char*>(&label), sizeof(label));
        const Eigen::VectorXd z = e.to_vector();
        os.write(reinterpret_cast<const char*>(z.data()),
                 static_cast<std::streamsize>(sizeof(double) * z.size()));
    }
    if (!os) throw io_error("write failed for " + path);
}

std::vector<Embedding> load_embeddings_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot read " + path);
    std::string line;
    if (!std::getline(is, line) || line != "scgfm-embed-bin-v1")
        throw parse_error(path + ": not an embedding binary");
    if (!std::getline(is, line)) throw parse_error(path + ": truncated header");
    std::istringstream hs(line);
    std::string tag;
    std::size_t count = 0;
    int k = 0, r = 0, m = 0, f = 0;
    if (!(hs >> tag >> count) || tag != "count") throw parse_error(path + ": bad header");
    if (!(hs >> tag >> k) || tag != "k") throw parse_error(path + ": bad header");
    if (!(hs >> tag >> r) || tag != "r") throw parse_error(path + ": bad header");
    if (!(hs >> tag >> m) || tag != "m") throw parse_error(path + ": bad header");
    if (!(hs >> tag >> f) || tag != "f") throw parse_error(path + ": bad header");
    const int dim = k + r + m * f;
    std::vector<Embedding> out;
    out.reserve(count);
    std::vector<double> z(dim);
    for (std::size_t i = 0; i < count; ++i) {
        std::int64_t id = 0, label = 0;
        is.read(reinterpret_cast<char*>(&id), sizeof(id));
        is.read(reinterpret_cast<char*>(&label), sizeof(label));
        is.read(reinterpret_cast<char*>(z.data()),
                static_cast<std::streamsize>(sizeof(double) * dim));
        if (!is) throw parse_error(path + ": truncated record");
        out.push_back(unpack(static_cast<int>(id), static_cast<int>(label), k, r, m, f, z));
    }
    return out;
}

}  // namespace scgfm
