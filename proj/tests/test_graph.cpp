#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scgfm/errors.hpp"
#include "scgfm/graph.hpp"
#include "scgfm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

using namespace scgfm;
namespace fs = std::filesystem;

namespace {

Graph triangle_tail() {
    // triangle 0-1-2 with a pendant node 3 off vertex 2
    Graph g;
    g.n = 4;
    g.edges = {{0, 1}, {0, 2}, {1, 2}, {2, 3}};
    g.features = Eigen::MatrixXd::Ones(4, 1);
    g.label = 0;
    return g;
}

fs::path temp_dir(const char* tag) {
    fs::path dir = fs::temp_directory_path() / (std::string("scgfm_test_") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

// ============================================================
// basic structure
// ============================================================

TEST_CASE("degrees and adjacency agree with the edge list") {
    Graph g = triangle_tail();
    auto deg = g.degrees();
    CHECK(deg == std::vector<int>{2, 2, 3, 1});

    auto adj = g.adjacency_list();
    CHECK(adj[0] == std::vector<int>{1, 2});
    CHECK(adj[2] == std::vector<int>{0, 1, 3});

    Eigen::MatrixXd a = g.dense_adjacency();
    CHECK(a == a.transpose());
    CHECK(a.diagonal().norm() == 0.0);
    CHECK(a.sum() == doctest::Approx(2.0 * g.num_edges()));
    Eigen::MatrixXd as(g.sparse_adjacency());
    CHECK((a - as).norm() == 0.0);
}

TEST_CASE("validate rejects broken graphs") {
    Graph g = triangle_tail();
    CHECK_NOTHROW(g.validate());

    Graph loop = g;
    loop.edges.push_back({3, 3});
    CHECK_THROWS_AS(loop.validate(), integrity_error);

    Graph oob = g;
    oob.edges.push_back({3, 4});
    CHECK_THROWS_AS(oob.validate(), integrity_error);

    Graph swapped = g;
    swapped.edges[0] = {1, 0};
    CHECK_THROWS_AS(swapped.validate(), integrity_error);

    Graph dup = g;
    dup.edges.push_back({2, 3});
    CHECK_THROWS_AS(dup.validate(), integrity_error);

    Graph badfeat = g;
    badfeat.features = Eigen::MatrixXd::Ones(3, 1);
    CHECK_THROWS_AS(badfeat.validate(), integrity_error);
}

// ============================================================
// metric measure space conversion
// ============================================================

TEST_CASE("to_mm_space uses the degree measure and drops isolated nodes") {
    Graph g = triangle_tail();
    g.n = 5;  // node 4 is isolated
    g.features = Eigen::MatrixXd::Ones(5, 1);
    MmSpace s = to_mm_space(g);

    CHECK(s.size() == 4);
    CHECK(s.index_map == std::vector<int>{0, 1, 2, 3});
    CHECK(s.measure.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // degree measure: deg / (2m) with degrees 2,2,3,1 and 2m = 8
    CHECK(s.measure[0] == doctest::Approx(2.0 / 8.0));
    CHECK(s.measure[2] == doctest::Approx(3.0 / 8.0));
    CHECK(s.measure[3] == doctest::Approx(1.0 / 8.0));

    Eigen::MatrixXd st = s.dense_structure();
    CHECK(st == st.transpose());
    CHECK(st.diagonal().norm() == 0.0);
    CHECK(st(0, 1) == 1.0);
    CHECK(st(0, 3) == 0.0);
}

TEST_CASE("edgeless graph falls back to the uniform measure") {
    Graph g;
    g.n = 3;
    g.features = Eigen::MatrixXd::Ones(3, 1);
    MmSpace s = to_mm_space(g);
    CHECK(s.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(s.measure[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mm_from_dense checks its inputs") {
    Eigen::MatrixXd st = Eigen::MatrixXd::Zero(2, 2);
    st(0, 1) = st(1, 0) = 1.0;
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.5;
    MmSpace s = mm_from_dense(st, mu);
    CHECK(s.size() == 2);

    Eigen::VectorXd bad(3);
    bad << 0.3, 0.3, 0.4;
    CHECK_THROWS_AS(mm_from_dense(st, bad), integrity_error);
}

// ============================================================
// file formats
// ============================================================

TEST_CASE("json graphs round-trip exactly") {
    std::vector<Graph> graphs;
    Graph a = triangle_tail();
    a.node_labels = {0, 1, 0, 1};
    graphs.push_back(a);
    Graph b = generate_er(7, 0.5, 11);
    b.label = 1;
    b.features = Eigen::MatrixXd::Random(7, 3);
    b.has_features = true;
    graphs.push_back(b);

    fs::path dir = temp_dir("json");
    std::string path = (dir / "graphs.json").string();
    save_json_graphs(path, graphs);
    auto back = load_json_graphs(path);

    REQUIRE(back.size() == graphs.size());
    for (size_t i = 0; i < graphs.size(); ++i) {
        CHECK(back[i].n == graphs[i].n);
        CHECK(back[i].edges == graphs[i].edges);
        CHECK(back[i].label == graphs[i].label);
        CHECK(back[i].node_labels == graphs[i].node_labels);
        CHECK(back[i].has_features == graphs[i].has_features);
        CHECK((back[i].features - graphs[i].features).cwiseAbs().maxCoeff() < 1e-12);
    }
    fs::remove_all(dir);
}

TEST_CASE("tu dataset round-trips node labels and attributes") {
    std::vector<Graph> graphs;
    for (int i = 0; i < 3; ++i) {
        Graph g = generate_er(5 + i, 0.6, 100 + i);
        g.label = i % 2;
        g.node_labels.assign(g.n, 0);
        for (int v = 0; v < g.n; ++v) g.node_labels[v] = v % 3;
        g.features = Eigen::MatrixXd::Random(g.n, 2);
        g.has_features = true;
        graphs.push_back(g);
    }

    fs::path dir = temp_dir("tu");
    write_tu_dataset(dir.string(), "TOY", graphs);
    auto back = load_tu_dataset(dir.string());

    REQUIRE(back.size() == graphs.size());
    for (size_t i = 0; i < graphs.size(); ++i) {
        CHECK(back[i].n == graphs[i].n);
        CHECK(back[i].edges == graphs[i].edges);
        CHECK(back[i].label == graphs[i].label);
        CHECK(back[i].node_labels == graphs[i].node_labels);
        CHECK((back[i].features - graphs[i].features).cwiseAbs().maxCoeff() < 1e-9);
    }
    fs::remove_all(dir);
}

TEST_CASE("loaders reject malformed input") {
    fs::path dir = temp_dir("bad");
    std::string path = (dir / "bad.json").string();
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("{\"n\": 2, \"edges\": [[0, 5]]}\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_json_graphs(path), integrity_error);
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("not json\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_json_graphs(path), parse_error);
    CHECK_THROWS_AS(load_tu_dataset((dir / "missing").string()), io_error);
    fs::remove_all(dir);
}

// ============================================================
// generators and samplers
// ============================================================

TEST_CASE("generate_er is deterministic and respects the density") {
    Graph a = generate_er(30, 0.3, 7);
    Graph b = generate_er(30, 0.3, 7);
    CHECK(a.edges == b.edges);
    CHECK_NOTHROW(a.validate());

    Graph c = generate_er(30, 0.3, 8);
    CHECK(a.edges != c.edges);

    // density: 435 slots at p = 0.3 -> ~130 +- a generous band
    CHECK(a.num_edges() > 60);
    CHECK(a.num_edges() < 220);

    CHECK(generate_er(5, 0.0, 1).num_edges() == 0);
    CHECK(generate_er(5, 1.0, 1).num_edges() == 10);
}

TEST_CASE("ppr scores match the dense resolvent") {
    Graph g = generate_er(12, 0.35, 3);
    const double alpha = 0.15;
    // long power iteration contracts at (1 - alpha) per step, so 400 steps
    // puts the iterate within machine precision of the fixed point
    Eigen::VectorXd x = ppr_scores(g, 4, alpha, 400);

    // oracle: solve (I - (1 - alpha) W) x = alpha e_c with the column-
    // stochastic walk matrix assembled by hand
    Eigen::MatrixXd a = g.dense_adjacency();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(g.n, g.n);
    for (int j = 0; j < g.n; ++j) {
        double colsum = a.col(j).sum();
        if (colsum > 0) w.col(j) = a.col(j) / colsum;
    }
    Eigen::VectorXd e = Eigen::VectorXd::Zero(g.n);
    e[4] = 1.0;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(g.n, g.n) - (1.0 - alpha) * w;
    Eigen::VectorXd oracle = sys.partialPivLu().solve(alpha * e);

    CHECK((x - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(x.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(x.minCoeff() >= 0.0);
}

TEST_CASE("ppr subgraph keeps the top scoring nodes around the center") {
    Graph g = generate_er(20, 0.25, 9);
    Graph ego = ppr_subgraph(g, 0, 6);
    CHECK(ego.n == 6);
    CHECK_NOTHROW(ego.validate());

    // induced edges only: every ego edge must exist in the parent between the
    // selected nodes; recover the selection from the ppr ranking
    Eigen::VectorXd scores = ppr_scores(g, 0, 0.15);
    std::vector<int> order(g.n);
    for (int i = 0; i < g.n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    std::set<int> keep = {0};
    for (int i = 0; i < g.n && static_cast<int>(keep.size()) < 6; ++i) keep.insert(order[i]);

    std::set<std::pair<int, int>> parent(g.edges.begin(), g.edges.end());
    std::vector<int> keep_sorted(keep.begin(), keep.end());
    int induced = 0;
    for (size_t i = 0; i < keep_sorted.size(); ++i)
        for (size_t j = i + 1; j < keep_sorted.size(); ++j)
            if (parent.count({keep_sorted[i], keep_sorted[j]})) ++induced;
    CHECK(ego.num_edges() == induced);

    // cap larger than the graph returns the whole graph
    Graph all = ppr_subgraph(g, 3, 50);
    CHECK(all.n == g.n);
    CHECK(all.num_edges() == g.num_edges());
}

TEST_CASE("ppr subgraph labels come from node labels when present") {
    Graph g = generate_er(10, 0.4, 5);
    g.label = 7;
    Graph ego = ppr_subgraph(g, 2, 5);
    CHECK(ego.label == 7);

    g.node_labels.assign(g.n, 0);
    g.node_labels[2] = 3;
    Graph ego2 = ppr_subgraph(g, 2, 5);
    CHECK(ego2.label == 3);
}

TEST_CASE("rewire preserves edge count and leaves labels alone") {
    Graph g = generate_er(25, 0.25, 13);
    g.label = 1;
    g.features = Eigen::MatrixXd::Random(25, 2);
    g.has_features = true;

    Graph same = rewire(g, 0.0, 99);
    CHECK(same.edges == g.edges);

    Graph moved = rewire(g, 0.7, 99);
    CHECK_NOTHROW(moved.validate());
    CHECK(moved.num_edges() == g.num_edges());
    CHECK(moved.edges != g.edges);
    CHECK(moved.label == g.label);
    CHECK((moved.features - g.features).norm() == 0.0);

    Graph again = rewire(g, 0.7, 99);
    CHECK(again.edges == moved.edges);

    // higher epsilon displaces at least as much structure on average
    auto overlap = [&](const Graph& h) {
        std::set<std::pair<int, int>> base(g.edges.begin(), g.edges.end());
        int common = 0;
        for (auto& e : h.edges) common += base.count(e);
        return common;
    };
    int kept_small = 0, kept_large = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        kept_small += overlap(rewire(g, 0.2, s));
        kept_large += overlap(rewire(g, 0.9, s));
    }
    CHECK(kept_small > kept_large);
}
