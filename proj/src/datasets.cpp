#include "geomancer/datasets.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace geomancer {

bool grammar_valid(const Graph& g, const GrammarSpec& spec) {
    if (g.n < 1) return false;
    for (int i = 0; i < g.n; ++i) {
        if (g.node_type[i] < 0 || g.node_type[i] >= spec.node_types()) return false;
        int order = 0;
        for (int j = 0; j < g.n; ++j) {
            const int e = g.etype(i, j);
            if (e < 0 || e >= spec.edge_types) return false;
            order += spec.bond_order(e);
        }
        if (order != spec.valence[g.node_type[i]]) return false;
    }
    return g.connected();
}

namespace {

bool try_assemble(Graph& g, const GrammarSpec& spec, int n, Rng& rng) {
    g = Graph(n);
    int total = 0;
    for (int i = 0; i < n; ++i) {
        g.node_type[i] = static_cast<int>(rng.uniform_int(spec.node_types()));
        total += spec.valence[g.node_type[i]];
    }
    if (total % 2 != 0 || total < 2 * (n - 1)) return false;

    std::vector<int> res(n);
    for (int i = 0; i < n; ++i) res[i] = spec.valence[g.node_type[i]];

    // random spanning tree of single bonds
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<int> attached{order[0]};
    for (int k = 1; k < n; ++k) {
        const int v = order[k];
        std::vector<int> hosts;
        for (int h : attached) {
            if (res[h] >= 1) hosts.push_back(h);
        }
        if (hosts.empty()) return false;
        const int h = hosts[rng.uniform_int(hosts.size())];
        g.set_edge(v, h, 1);
        --res[v];
        --res[h];
        attached.push_back(v);
    }

    // random valid additions until every valence is saturated
    while (true) {
        bool any_residual = false;
        for (int i = 0; i < n; ++i) any_residual = any_residual || res[i] > 0;
        if (!any_residual) break;

        // moves: add a single bond, or upgrade a single bond to a double bond
        std::vector<std::pair<int, int>> add_moves, up_moves;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (res[i] >= 1 && res[j] >= 1) {
                    if (g.etype(i, j) == 0) add_moves.emplace_back(i, j);
                    if (g.etype(i, j) == 1 && spec.edge_types > 2) up_moves.emplace_back(i, j);
                }
            }
        }
        const std::size_t m = add_moves.size() + up_moves.size();
        if (m == 0) return false;
        const std::size_t pick = rng.uniform_int(m);
        if (pick < add_moves.size()) {
            auto [i, j] = add_moves[pick];
            g.set_edge(i, j, 1);
            --res[i];
            --res[j];
        } else {
            auto [i, j] = up_moves[pick - add_moves.size()];
            g.set_edge(i, j, 2);
            --res[i];
            --res[j];
        }
    }
    return true;
}

}  // namespace

std::vector<Graph> gen_valence_graphs(int count, const GrammarSpec& spec, std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("gen_valence_graphs: bad count");
    Rng rng(seed);
    std::vector<Graph> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        const int n = spec.min_nodes + static_cast<int>(rng.uniform_int(spec.max_nodes - spec.min_nodes + 1));
        Graph g;
        if (try_assemble(g, spec, n, rng) && grammar_valid(g, spec)) {
            g.y_graph = regression_target(g);
            out.push_back(std::move(g));
        }
    }
    return out;
}

Graph gen_sbm(int n_per_block, int blocks, double p_in, double p_out, std::uint64_t seed) {
    if (n_per_block < 1 || blocks < 2) throw std::invalid_argument("gen_sbm: bad sizes");
    if (!(p_in > p_out)) throw std::invalid_argument("gen_sbm: requires p_in > p_out");
    Rng rng(seed);
    const int n = n_per_block * blocks;
    Graph g(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i / n_per_block;
    for (int i = 0; i < n; ++i) {
        int type = labels[i];
        if (rng.uniform() < 0.1) {  // corrupt the one-hot block feature
            const int shift = 1 + static_cast<int>(rng.uniform_int(blocks - 1));
            type = (type + shift) % blocks;
        }
        g.node_type[i] = type;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p = labels[i] == labels[j] ? p_in : p_out;
            if (rng.uniform() < p) g.set_edge(i, j, 1);
        }
    }
    g.y_nodes = labels;
    return g;
}

int count_triangles(const Graph& g) {
    int t = 0;
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            if (g.etype(i, j) == 0) continue;
            for (int k = j + 1; k < g.n; ++k) {
                if (g.etype(i, k) > 0 && g.etype(j, k) > 0) ++t;
            }
        }
    }
    return t;
}

double regression_target(const Graph& g) {
    int type_c = 0;
    for (int t : g.node_type) type_c += t == 2 ? 1 : 0;
    int doubles = 0;
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) doubles += g.etype(i, j) == 2 ? 1 : 0;
    }
    return 1.0 * count_triangles(g) + 0.5 * type_c - 0.25 * doubles;
}

std::string graph_to_json_line(const Graph& g) {
    nlohmann::ordered_json j;
    j["nodes"] = g.node_type;
    auto edges = nlohmann::ordered_json::array();
    for (int a = 0; a < g.n; ++a) {
        for (int b = a + 1; b < g.n; ++b) {
            if (g.etype(a, b) >= 1) edges.push_back({a, b, g.etype(a, b)});
        }
    }
    j["edges"] = edges;
    if (g.y_graph.has_value()) {
        j["y_graph"] = *g.y_graph;
    } else {
        j["y_graph"] = nullptr;
    }
    if (g.y_nodes.has_value()) {
        j["y_nodes"] = *g.y_nodes;
    } else {
        j["y_nodes"] = nullptr;
    }
    return j.dump();
}

Graph graph_from_json_line(const std::string& line, int line_number) {
    const std::string where = "jsonl line " + std::to_string(line_number) + ": ";
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error(where + e.what());
    }
    if (!j.contains("nodes") || !j["nodes"].is_array() || j["nodes"].empty()) {
        throw std::runtime_error(where + "missing or empty nodes");
    }
    Graph g(static_cast<int>(j["nodes"].size()));
    for (int i = 0; i < g.n; ++i) {
        const auto& t = j["nodes"][i];
        if (!t.is_number_integer() || t.get<int>() < 0) throw std::runtime_error(where + "bad node type");
        g.node_type[i] = t.get<int>();
    }
    if (j.contains("edges")) {
        for (const auto& e : j["edges"]) {
            if (!e.is_array() || e.size() != 3) throw std::runtime_error(where + "bad edge entry");
            const int a = e[0].get<int>(), b = e[1].get<int>(), t = e[2].get<int>();
            if (a == b) throw std::runtime_error(where + "self-loop rejected");
            if (a < 0 || b < 0 || a >= g.n || b >= g.n) throw std::runtime_error(where + "edge index out of range");
            if (!(a < b)) throw std::runtime_error(where + "edges must have i < j");
            if (t < 1) throw std::runtime_error(where + "edge type must be >= 1");
            g.set_edge(a, b, t);
        }
    }
    if (j.contains("y_graph") && !j["y_graph"].is_null()) {
        g.y_graph = j["y_graph"].get<double>();
    }
    if (j.contains("y_nodes") && !j["y_nodes"].is_null()) {
        std::vector<int> yn = j["y_nodes"].get<std::vector<int>>();
        if (static_cast<int>(yn.size()) != g.n) throw std::runtime_error(where + "y_nodes length mismatch");
        g.y_nodes = std::move(yn);
    }
    return g;
}

std::vector<Graph> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
    std::vector<Graph> out;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        out.push_back(graph_from_json_line(line, ln));
    }
    return out;
}

void save_jsonl(const std::vector<Graph>& graphs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
    for (const auto& g : graphs) out << graph_to_json_line(g) << '\n';
}

DatasetSplit make_split(int count, std::uint64_t seed, double train_frac, double val_frac) {
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x5b1f7));
    rng.shuffle(idx);
    DatasetSplit split;
    split.seed = seed;
    const int n_train = static_cast<int>(count * train_frac);
    const int n_val = static_cast<int>(count * val_frac);
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    split.test.assign(idx.begin() + n_train + n_val, idx.end());
    return split;
}

}  // namespace geomancer
