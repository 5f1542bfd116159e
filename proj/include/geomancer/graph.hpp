#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace geomancer {

// Undirected typed graph. edge_type is a dense n*n symmetric matrix of
// categorical ids where 0 means "no edge"; the diagonal is always 0.
struct Graph {
    int n = 0;
    std::vector<int> node_type;                  // size n
    std::vector<int> edge_type;                  // size n*n, row-major
    std::optional<std::vector<int>> y_nodes;
    std::optional<double> y_graph;

    Graph() = default;
    explicit Graph(int nodes) : n(nodes), node_type(nodes, 0), edge_type(static_cast<std::size_t>(nodes) * nodes, 0) {
        if (nodes < 1) throw std::invalid_argument("graph: n must be >= 1");
    }

    int etype(int i, int j) const { return edge_type[static_cast<std::size_t>(i) * n + j]; }

    void set_edge(int i, int j, int t) {
        if (i == j) throw std::invalid_argument("graph: self-loop");
        edge_type[static_cast<std::size_t>(i) * n + j] = t;
        edge_type[static_cast<std::size_t>(j) * n + i] = t;
    }

    int degree(int i) const {
        int d = 0;
        for (int j = 0; j < n; ++j) d += etype(i, j) > 0 ? 1 : 0;
        return d;
    }

    bool connected() const {
        if (n == 1) return true;
        std::vector<int> stack{0};
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        seen[0] = true;
        int count = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int j = 0; j < n; ++j) {
                if (etype(v, j) > 0 && !seen[j]) {
                    seen[j] = true;
                    ++count;
                    stack.push_back(j);
                }
            }
        }
        return count == n;
    }

    bool operator==(const Graph& other) const {
        return n == other.n && node_type == other.node_type && edge_type == other.edge_type &&
               y_nodes == other.y_nodes && y_graph == other.y_graph;
    }
};

}  // namespace geomancer
