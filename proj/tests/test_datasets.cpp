#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geomancer/datasets.hpp"
#include "oracles.hpp"

using namespace geomancer;

TEST_CASE("grammar validity oracle") {
    GrammarSpec spec;

    // path A-B-A with single bonds: valences 1,2,1 all saturated
    Graph path(3);
    path.node_type = {0, 1, 0};
    path.set_edge(0, 1, 1);
    path.set_edge(1, 2, 1);
    CHECK(grammar_valid(path, spec));

    // triangle of B nodes with single bonds saturates valence 2 everywhere
    Graph tri(3);
    tri.node_type = {1, 1, 1};
    tri.set_edge(0, 1, 1);
    tri.set_edge(1, 2, 1);
    tri.set_edge(0, 2, 1);
    CHECK(grammar_valid(tri, spec));
    CHECK(regression_target(tri) == doctest::Approx(1.0));

    // unsaturated and disconnected cases
    Graph lonely(2);
    lonely.node_type = {0, 0};
    CHECK_FALSE(grammar_valid(lonely, spec));
    Graph overfull(2);
    overfull.node_type = {0, 0};
    overfull.set_edge(0, 1, 2);  // double bond on two A nodes
    CHECK_FALSE(grammar_valid(overfull, spec));
}

TEST_CASE("generated grammar graphs are always valid and reproducible") {
    GrammarSpec spec;
    auto graphs = gen_valence_graphs(200, spec, 2025);
    REQUIRE(graphs.size() == 200);
    for (const auto& g : graphs) {
        CHECK(grammar_valid(g, spec));
        CHECK(g.n >= spec.min_nodes);
        CHECK(g.n <= spec.max_nodes);
    }
    auto again = gen_valence_graphs(200, spec, 2025);
    for (std::size_t i = 0; i < graphs.size(); ++i) CHECK(graphs[i] == again[i]);

    auto other = gen_valence_graphs(50, spec, 2026);
    bool any_diff = false;
    for (std::size_t i = 0; i < other.size(); ++i) any_diff = any_diff || !(other[i] == graphs[i]);
    CHECK(any_diff);
}

TEST_CASE("regression target") {
    // single unbonded node
    Graph a(1);
    a.node_type = {0};
    CHECK(regression_target(a) == doctest::Approx(0.0));
    Graph c(1);
    c.node_type = {2};
    CHECK(regression_target(c) == doctest::Approx(0.5));

    // upgrading one single bond to a double lowers y by exactly 0.25
    GrammarSpec spec;
    auto graphs = gen_valence_graphs(30, spec, 7);
    int tested = 0;
    for (auto g : graphs) {
        for (int i = 0; i < g.n && tested < 10; ++i) {
            for (int j = i + 1; j < g.n; ++j) {
                if (g.etype(i, j) == 1) {
                    const double before = regression_target(g);
                    g.set_edge(i, j, 2);
                    CHECK(regression_target(g) == doctest::Approx(before - 0.25));
                    g.set_edge(i, j, 1);
                    ++tested;
                    break;
                }
            }
        }
    }
    CHECK(tested == 10);

    // matches the trace(A^3)/6 triangle enumerator on every generated graph
    for (const auto& g : graphs) CHECK(count_triangles(g) == oracles::trace_triangle_count(g));
}

TEST_CASE("sbm generation") {
    Graph g = gen_sbm(30, 3, 0.3, 0.02, 99);
    REQUIRE(g.n == 90);
    REQUIRE(g.y_nodes.has_value());

    // labels are block ids; features are corrupted copies
    int agree = 0;
    for (int i = 0; i < g.n; ++i) {
        CHECK((*g.y_nodes)[i] == i / 30);
        agree += g.node_type[i] == (*g.y_nodes)[i] ? 1 : 0;
    }
    CHECK(agree > 70);  // flip probability 0.1
    CHECK(agree < 90);

    Graph again = gen_sbm(30, 3, 0.3, 0.02, 99);
    CHECK(g == again);

    // p_out = 0 would violate p_in > p_out >=, but near-zero separates blocks
    Graph sep = gen_sbm(10, 2, 0.8, 0.001, 5);
    int cross = 0;
    for (int i = 0; i < 10; ++i) {
        for (int j = 10; j < 20; ++j) cross += sep.etype(i, j) > 0 ? 1 : 0;
    }
    CHECK(cross <= 1);

    CHECK_THROWS(gen_sbm(10, 2, 0.1, 0.3, 1));
}

TEST_CASE("sbm separability oracle reaches 0.9") {
    // independent-classifier oracle on the spec's reference configuration
    Graph g = gen_sbm(30, 3, 0.3, 0.02, 424242);
    const double acc = oracles::logistic_degree_profile_accuracy(g, 3, 17);
    CHECK(acc >= 0.9);
}

TEST_CASE("jsonl round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "geomancer_test_io";
    fs::create_directories(dir);
    const auto path = (dir / "graphs.jsonl").string();

    // empty file -> empty list
    {
        std::ofstream out(path);
    }
    CHECK(load_jsonl(path).empty());

    GrammarSpec spec;
    auto graphs = gen_valence_graphs(100, spec, 31337);
    graphs[0].y_nodes = std::vector<int>(graphs[0].n, 1);
    graphs[1].y_graph.reset();
    save_jsonl(graphs, path);
    auto loaded = load_jsonl(path);
    REQUIRE(loaded.size() == graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) CHECK(loaded[i] == graphs[i]);

    // byte-identical re-serialization
    std::string line0 = graph_to_json_line(graphs[0]);
    CHECK(graph_to_json_line(loaded[0]) == line0);

    // malformed lines are rejected with the line number
    CHECK_THROWS_WITH_AS(graph_from_json_line(R"({"nodes":[0,0],"edges":[[1,1,1]]})", 7),
                         doctest::Contains("line 7"), std::runtime_error);
    CHECK_THROWS(graph_from_json_line(R"({"nodes":[0,0],"edges":[[1,0,1]]})", 1));
    CHECK_THROWS(graph_from_json_line(R"({"nodes":[0,0],"edges":[[0,1,0]]})", 1));
    CHECK_THROWS(graph_from_json_line("not json", 3));
}

TEST_CASE("splits are disjoint, covering, reproducible") {
    auto s = make_split(100, 77);
    CHECK(s.train.size() == 80);
    CHECK(s.val.size() == 10);
    CHECK(s.test.size() == 10);
    std::vector<bool> seen(100, false);
    for (auto part : {&s.train, &s.val, &s.test}) {
        for (int i : *part) {
            CHECK_FALSE(seen[i]);
            seen[i] = true;
        }
    }
    for (bool b : seen) CHECK(b);
    auto s2 = make_split(100, 77);
    CHECK(s.train == s2.train);
    CHECK(s.test == s2.test);
}
