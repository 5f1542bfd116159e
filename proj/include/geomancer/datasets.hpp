#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomancer/graph.hpp"
#include "geomancer/rng.hpp"

namespace geomancer {

// Valence-constrained graph grammar: node types A..D with valences 1..4, edge
// types none/single/double with bond orders 0/1/2, sizes in [4, 12]. A graph
// is valid iff it is connected and every node's incident bond order equals its
// type's valence exactly.
struct GrammarSpec {
    std::vector<int> valence{1, 2, 3, 4};  // indexed by node type
    int edge_types = 3;                    // 0 = none, 1 = single, 2 = double
    int min_nodes = 4;
    int max_nodes = 12;

    int node_types() const { return static_cast<int>(valence.size()); }
    int bond_order(int etype) const { return etype; }
};

bool grammar_valid(const Graph& g, const GrammarSpec& spec);

std::vector<Graph> gen_valence_graphs(int count, const GrammarSpec& spec, std::uint64_t seed);

// One SBM community graph: block id is the node label; the node feature (type)
// is the block id corrupted with flip probability 0.1.
Graph gen_sbm(int n_per_block, int blocks, double p_in, double p_out, std::uint64_t seed);

// y = 1.0 * (#triangles) + 0.5 * (#type-C nodes) - 0.25 * (#double bonds)
double regression_target(const Graph& g);
int count_triangles(const Graph& g);

// JSONL wire format, one graph per line:
// {"nodes":[t0,...],"edges":[[i,j,etype],...],"y_graph":num|null,"y_nodes":[...]|null}
// with i < j, no self-loops, etype >= 1.
std::vector<Graph> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Graph>& graphs, const std::string& path);
std::string graph_to_json_line(const Graph& g);
Graph graph_from_json_line(const std::string& line, int line_number);

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    std::uint64_t seed = 0;
};

// Seeded-shuffle split with the given fractions (defaults 80/10/10).
DatasetSplit make_split(int count, std::uint64_t seed, double train_frac = 0.8,
                        double val_frac = 0.1);

}  // namespace geomancer
