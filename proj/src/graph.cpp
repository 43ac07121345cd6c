#include "scgfm/graph.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace scgfm {

// ============================================================ Graph basics

std::vector<int> Graph::degrees() const {
    std::vector<int> deg(n, 0);
    for (const auto& [a, b] : edges) {
        ++deg[a];
        ++deg[b];
    }
    return deg;
}

std::vector<std::vector<int>> Graph::adjacency_list() const {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& nb : adj) std::sort(nb.begin(), nb.end());
    return adj;
}

Eigen::SparseMatrix<double> Graph::sparse_adjacency() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges.size() * 2);
    for (const auto& [a, b] : edges) {
        trips.emplace_back(a, b, 1.0);
        trips.emplace_back(b, a, 1.0);
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

Eigen::MatrixXd Graph::dense_adjacency() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [a, b] : edges) {
        m(a, b) = 1.0;
        m(b, a) = 1.0;
    }
    return m;
}

void Graph::validate() const {
    if (n < 0) throw integrity_error("negative node count");
    std::pair<int, int> prev{-1, -1};
    for (const auto& e : edges) {
        if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
            throw integrity_error("edge endpoint out of range");
        if (e.first == e.second) throw integrity_error("self loop");
        if (e.first > e.second) throw integrity_error("edge not stored as (low, high)");
        if (!(prev < e)) throw integrity_error("edges not sorted unique");
        prev = e;
    }
    if (n > 0 && features.rows() != n)
        throw integrity_error("feature row count does not match node count");
    if (!node_labels.empty() && static_cast<int>(node_labels.size()) != n)
        throw integrity_error("node label count does not match node count");
}

// ============================================================ mm-space

MmSpace to_mm_space(const Graph& g) {
    if (g.n == 0) throw integrity_error("empty graph has no mm-space");
    const auto deg = g.degrees();
    const long long total = std::accumulate(deg.begin(), deg.end(), 0LL);

    MmSpace mm;
    if (total == 0) {
        // edgeless: uniform fallback over every node
        mm.structure = Eigen::SparseMatrix<double>(g.n, g.n);
        mm.measure = Eigen::VectorXd::Constant(g.n, 1.0 / g.n);
        mm.index_map.resize(g.n);
        std::iota(mm.index_map.begin(), mm.index_map.end(), 0);
        return mm;
    }

    // keep only nodes with positive degree; they carry all the mass
    std::vector<int> pos(g.n, -1);
    for (int i = 0; i < g.n; ++i) {
        if (deg[i] > 0) {
            pos[i] = static_cast<int>(mm.index_map.size());
            mm.index_map.push_back(i);
        }
    }
    const int s = static_cast<int>(mm.index_map.size());
    mm.measure.resize(s);
    for (int i = 0; i < s; ++i) mm.measure[i] = deg[mm.index_map[i]] / static_cast<double>(total);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(g.edges.size() * 2);
    for (const auto& [a, b] : g.edges) {
        trips.emplace_back(pos[a], pos[b], 1.0);
        trips.emplace_back(pos[b], pos[a], 1.0);
    }
    mm.structure = Eigen::SparseMatrix<double>(s, s);
    mm.structure.setFromTriplets(trips.begin(), trips.end());
    return mm;
}

MmSpace mm_from_dense(const Eigen::MatrixXd& structure, const Eigen::VectorXd& measure) {
    if (structure.rows() != structure.cols() || structure.rows() != measure.size())
        throw integrity_error("structure/measure size mismatch");
    MmSpace mm;
    mm.structure = structure.sparseView();
    mm.measure = measure;
    mm.index_map.resize(measure.size());
    std::iota(mm.index_map.begin(), mm.index_map.end(), 0);
    return mm;
}

MmSpace mm_uniform(const Eigen::MatrixXd& structure) {
    const auto n = structure.rows();
    return mm_from_dense(structure, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

// ============================================================ TU datasets

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw io_error("cannot open " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

long long parse_ll(const std::string& s, const fs::path& file, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw parse_error(file.filename().string() + ":" + std::to_string(lineno) +
                          ": expected integer, got '" + s + "'");
    }
}

double parse_num(const std::string& s, const fs::path& file, std::size_t lineno) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw parse_error(file.filename().string() + ":" + std::to_string(lineno) +
                          ": expected number, got '" + s + "'");
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
    }
    return out;
}

fs::path tu_file(const fs::path& dir, const std::string& suffix, bool required) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            return entry.path();
    }
    if (required) throw io_error("no *" + suffix + " in " + dir.string());
    return {};
}

}  // namespace

std::vector<Graph> load_tu_dataset(const std::string& dir_s) {
    const fs::path dir(dir_s);
    if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir_s);

    const auto ind_path = tu_file(dir, "_graph_indicator.txt", true);
    const auto a_path = tu_file(dir, "_A.txt", true);
    const auto glab_path = tu_file(dir, "_graph_labels.txt", true);
    const auto nlab_path = tu_file(dir, "_node_labels.txt", false);
    const auto nattr_path = tu_file(dir, "_node_attributes.txt", false);

    // node -> graph, both converted to 0-based
    const auto ind_lines = read_lines(ind_path);
    const int total_nodes = static_cast<int>(ind_lines.size());
    std::vector<int> node_graph(total_nodes);
    int num_graphs = 0;
    for (std::size_t i = 0; i < ind_lines.size(); ++i) {
        const auto gi = parse_ll(ind_lines[i], ind_path, i + 1);
        if (gi < 1) throw integrity_error("graph indicator below 1");
        node_graph[i] = static_cast<int>(gi - 1);
        num_graphs = std::max(num_graphs, static_cast<int>(gi));
    }

    std::vector<Graph> graphs(num_graphs);
    // local index of each node inside its graph, assigned in node-id order
    std::vector<int> local(total_nodes);
    for (int v = 0; v < total_nodes; ++v) local[v] = graphs[node_graph[v]].n++;

    std::vector<std::set<std::pair<int, int>>> edge_sets(num_graphs);
    const auto a_lines = read_lines(a_path);
    for (std::size_t i = 0; i < a_lines.size(); ++i) {
        if (a_lines[i].empty()) continue;
        const auto parts = split_csv(a_lines[i]);
        if (parts.size() != 2)
            throw parse_error(a_path.filename().string() + ":" + std::to_string(i + 1) +
                              ": expected 'src, dst'");
        const auto a = parse_ll(parts[0], a_path, i + 1) - 1;
        const auto b = parse_ll(parts[1], a_path, i + 1) - 1;
        if (a < 0 || b < 0 || a >= total_nodes || b >= total_nodes)
            throw integrity_error("edge endpoint out of range at line " + std::to_string(i + 1));
        if (a == b) throw integrity_error("self loop at line " + std::to_string(i + 1));
        const int ga = node_graph[a];
        if (ga != node_graph[b])
            throw integrity_error("edge crosses graphs at line " + std::to_string(i + 1));
        const int la = local[a];
        const int lb = local[b];
        edge_sets[ga].insert({std::min(la, lb), std::max(la, lb)});
    }
    for (int g = 0; g < num_graphs; ++g)
        graphs[g].edges.assign(edge_sets[g].begin(), edge_sets[g].end());

    const auto glab_lines = read_lines(glab_path);
    if (static_cast<int>(glab_lines.size()) != num_graphs)
        throw integrity_error("graph label count does not match graph count");
    for (std::size_t i = 0; i < glab_lines.size(); ++i)
        graphs[i].label = static_cast<int>(parse_ll(glab_lines[i], glab_path, i + 1));

    std::vector<int> nlabels;
    if (!nlab_path.empty()) {
        const auto lines = read_lines(nlab_path);
        if (static_cast<int>(lines.size()) != total_nodes)
            throw integrity_error("node label count does not match node count");
        nlabels.resize(total_nodes);
        for (std::size_t i = 0; i < lines.size(); ++i)
            nlabels[i] = static_cast<int>(parse_ll(lines[i], nlab_path, i + 1));
        for (int v = 0; v < total_nodes; ++v) graphs[node_graph[v]].node_labels.push_back(nlabels[v]);
    }

    if (!nattr_path.empty()) {
        const auto lines = read_lines(nattr_path);
        if (static_cast<int>(lines.size()) != total_nodes)
            throw integrity_error("node attribute count does not match node count");
        const int f = static_cast<int>(split_csv(lines[0]).size());
        for (auto& g : graphs) g.features = Eigen::MatrixXd::Zero(g.n, f);
        std::vector<int> row(num_graphs, 0);
        for (int v = 0; v < total_nodes; ++v) {
            const auto parts = split_csv(lines[v]);
            if (static_cast<int>(parts.size()) != f)
                throw parse_error(nattr_path.filename().string() + ":" + std::to_string(v + 1) +
                                  ": inconsistent attribute arity");
            auto& g = graphs[node_graph[v]];
            for (int c = 0; c < f; ++c) g.features(row[node_graph[v]], c) = parse_num(parts[c], nattr_path, v + 1);
            ++row[node_graph[v]];
        }
        for (auto& g : graphs) g.has_features = true;
    } else if (!nlabels.empty()) {
        // one-hot encode node labels over the dataset-wide label alphabet
        std::vector<int> uniq(nlabels);
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (auto& g : graphs) {
            g.features = Eigen::MatrixXd::Zero(g.n, static_cast<int>(uniq.size()));
            for (int v = 0; v < g.n; ++v) {
                const auto it = std::lower_bound(uniq.begin(), uniq.end(), g.node_labels[v]);
                g.features(v, static_cast<int>(it - uniq.begin())) = 1.0;
            }
        }
    } else {
        // featureless dataset: single constant feature
        for (auto& g : graphs) g.features = Eigen::MatrixXd::Ones(g.n, 1);
    }

    for (const auto& g : graphs) g.validate();
    return graphs;
}

void write_tu_dataset(const std::string& dir_s, const std::string& name,
                      const std::vector<Graph>& graphs) {
    const fs::path dir(dir_s);
    fs::create_directories(dir);
    std::ofstream a(dir / (name + "_A.txt"));
    std::ofstream ind(dir / (name + "_graph_indicator.txt"));
    std::ofstream glab(dir / (name + "_graph_labels.txt"));
    if (!a || !ind || !glab) throw io_error("cannot write TU files in " + dir_s);

    const bool all_node_labels =
        std::all_of(graphs.begin(), graphs.end(),
                    [](const Graph& g) { return !g.node_labels.empty() || g.n == 0; });
    const bool any_attrs =
        std::any_of(graphs.begin(), graphs.end(), [](const Graph& g) { return g.has_features; });

    std::ofstream nlab, nattr;
    if (all_node_labels) nlab.open(dir / (name + "_node_labels.txt"));
    if (any_attrs) nattr.open(dir / (name + "_node_attributes.txt"));

    int base = 1;  // global node ids are 1-based on disk
    int gid = 1;
    for (const auto& g : graphs) {
        for (const auto& [u, v] : g.edges) {
            a << base + u << ", " << base + v << "\n";
            a << base + v << ", " << base + u << "\n";
        }
        for (int v = 0; v < g.n; ++v) {
            ind << gid << "\n";
            if (all_node_labels) nlab << g.node_labels[v] << "\n";
            if (any_attrs) {
                for (int c = 0; c < g.features.cols(); ++c) {
                    if (c) nattr << ", ";
                    char buf[40];
                    std::snprintf(buf, sizeof(buf), "%.17g", g.features(v, c));
                    nattr << buf;
                }
                nattr << "\n";
            }
        }
        glab << g.label << "\n";
        base += g.n;
        ++gid;
    }
}

// ============================================================ JSON lines

std::vector<Graph> load_json_graphs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::vector<Graph> graphs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Graph g;
        if (!j.contains("n") || !j["n"].is_number_integer())
            throw parse_error(path + ":" + std::to_string(lineno) + ": missing integer 'n'");
        g.n = j["n"].get<int>();
        if (g.n < 0) throw integrity_error("negative n at line " + std::to_string(lineno));
        std::set<std::pair<int, int>> es;
        for (const auto& e : j.value("edges", json::array())) {
            if (!e.is_array() || e.size() != 2)
                throw parse_error(path + ":" + std::to_string(lineno) + ": edge must be [i,j]");
            const int u = e[0].get<int>();
            const int v = e[1].get<int>();
            if (u < 0 || v < 0 || u >= g.n || v >= g.n)
                throw integrity_error("edge out of range at line " + std::to_string(lineno));
            if (u == v) throw integrity_error("self loop at line " + std::to_string(lineno));
            es.insert({std::min(u, v), std::max(u, v)});
        }
        g.edges.assign(es.begin(), es.end());
        if (j.contains("features")) {
            const auto& feats = j["features"];
            if (!feats.is_array() || static_cast<int>(feats.size()) != g.n)
                throw integrity_error("feature row count mismatch at line " + std::to_string(lineno));
            const int f = feats.empty() ? 0 : static_cast<int>(feats[0].size());
            g.features = Eigen::MatrixXd::Zero(g.n, std::max(f, 1));
            for (int r = 0; r < g.n; ++r) {
                const auto& row = feats[r];
                if (static_cast<int>(row.size()) != f)
                    throw integrity_error("ragged feature rows at line " + std::to_string(lineno));
                for (int c = 0; c < f; ++c) g.features(r, c) = row[c].get<double>();
            }
            g.has_features = true;
        } else {
            g.features = Eigen::MatrixXd::Ones(g.n, 1);
        }
        g.label = j.value("label", -1);
        if (j.contains("node_labels")) {
            const auto& nl = j["node_labels"];
            if (static_cast<int>(nl.size()) != g.n)
                throw integrity_error("node label count mismatch at line " + std::to_string(lineno));
            for (const auto& x : nl) g.node_labels.push_back(x.get<int>());
        }
        g.validate();
        graphs.push_back(std::move(g));
    }
    return graphs;
}

void save_json_graphs(const std::string& path, const std::vector<Graph>& graphs) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (const auto& g : graphs) {
        json j;
        j["n"] = g.n;
        auto es = json::array();
        for (const auto& [u, v] : g.edges) es.push_back(json::array({u, v}));
        j["edges"] = es;
        if (g.has_features) {
            auto feats = json::array();
            for (int r = 0; r < g.n; ++r) {
                auto row = json::array();
                for (int c = 0; c < g.features.cols(); ++c) row.push_back(g.features(r, c));
                feats.push_back(row);
            }
            j["features"] = feats;
        }
        if (g.label != -1) j["label"] = g.label;
        if (!g.node_labels.empty()) j["node_labels"] = g.node_labels;
        out << j.dump() << "\n";
    }
}

// ============================================================ generators

Graph generate_er(int n, double p, std::uint64_t seed) {
    if (n < 1) throw integrity_error("generate_er needs n >= 1");
    if (p < 0.0 || p > 1.0) throw integrity_error("generate_er needs p in [0,1]");
    Rng rng(seed);
    Graph g;
    g.n = n;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform01() < p) g.edges.emplace_back(i, j);
    g.features = Eigen::MatrixXd::Ones(n, 1);
    return g;
}

Eigen::VectorXd ppr_scores(const Graph& g, int center, double alpha, int steps) {
    if (center < 0 || center >= g.n) throw index_error("ppr center out of range");
    const auto deg = g.degrees();
    const auto adj = g.adjacency_list();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(g.n);
    x[center] = 1.0;
    Eigen::VectorXd next(g.n);
    for (int s = 0; s < steps; ++s) {
        next.setZero();
        for (int j = 0; j < g.n; ++j) {
            if (deg[j] == 0 || x[j] == 0.0) continue;
            const double share = x[j] / deg[j];
            for (const int i : adj[j]) next[i] += share;
        }
        x = alpha * Eigen::VectorXd::Unit(g.n, center) + (1.0 - alpha) * next;
    }
    return x;
}

Graph ppr_subgraph(const Graph& g, int center, int cap, double alpha) {
    if (center < 0 || center >= g.n) throw index_error("ppr center out of range");
    if (cap < 1) throw integrity_error("ppr cap must be >= 1");
    const auto scores = ppr_scores(g, center, alpha);

    std::vector<int> order(g.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    std::vector<int> keep{center};
    for (const int v : order) {
        if (static_cast<int>(keep.size()) >= cap) break;
        if (v != center) keep.push_back(v);
    }
    std::sort(keep.begin(), keep.end());

    std::vector<int> pos(g.n, -1);
    for (std::size_t i = 0; i < keep.size(); ++i) pos[keep[i]] = static_cast<int>(i);

    Graph out;
    out.n = static_cast<int>(keep.size());
    for (const auto& [u, v] : g.edges)
        if (pos[u] >= 0 && pos[v] >= 0)
            out.edges.emplace_back(std::min(pos[u], pos[v]), std::max(pos[u], pos[v]));
    std::sort(out.edges.begin(), out.edges.end());
    out.features.resize(out.n, g.features.cols());
    for (int i = 0; i < out.n; ++i) out.features.row(i) = g.features.row(keep[i]);
    out.has_features = g.has_features;
    if (!g.node_labels.empty()) {
        out.label = g.node_labels[center];
        for (const int v : keep) out.node_labels.push_back(g.node_labels[v]);
    } else {
        out.label = g.label;
    }
    return out;
}

Graph rewire(const Graph& g, double epsilon, std::uint64_t seed) {
    if (epsilon < 0.0 || epsilon > 1.0) throw integrity_error("rewire epsilon in [0,1]");
    Rng rng(seed);
    std::set<std::pair<int, int>> es(g.edges.begin(), g.edges.end());
    for (const auto& e : g.edges) {
        if (rng.uniform01() >= epsilon) continue;
        es.erase(e);
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const int u = static_cast<int>(rng.uniform_int(0, g.n - 1));
            const int v = static_cast<int>(rng.uniform_int(0, g.n - 1));
            if (u == v) continue;
            const std::pair<int, int> cand{std::min(u, v), std::max(u, v)};
            if (es.count(cand)) continue;
            es.insert(cand);
            placed = true;
        }
        if (!placed) es.insert(e);  // dense graph: no free slot, keep the edge
    }
    Graph out = g;
    out.edges.assign(es.begin(), es.end());
    return out;
}

}  // namespace scgfm
