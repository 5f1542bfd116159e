#pragma once

// Independent test oracles. These deliberately avoid the library's model code:
// they are the reference implementations acceptance checks compare against.

#include <cmath>
#include <vector>

#include "geomancer/graph.hpp"
#include "geomancer/rng.hpp"

namespace oracles {

// Per-node degree profile: edge count toward each observed node type.
inline std::vector<std::vector<double>> degree_profiles(const geomancer::Graph& g, int num_types) {
    std::vector<std::vector<double>> feats(g.n, std::vector<double>(num_types + 1, 0.0));
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (i != j && g.etype(i, j) > 0) feats[i][g.node_type[j]] += 1.0;
        }
        feats[i][num_types] = 1.0;  // bias
    }
    return feats;
}

// Multinomial logistic regression via plain gradient descent; returns held-out
// accuracy on a 30% split of the nodes.
inline double logistic_degree_profile_accuracy(const geomancer::Graph& g, int num_classes,
                                               std::uint64_t seed) {
    const auto feats = degree_profiles(g, num_classes);
    const int dim = static_cast<int>(feats[0].size());
    const auto& labels = *g.y_nodes;

    std::vector<int> idx(g.n);
    for (int i = 0; i < g.n; ++i) idx[i] = i;
    geomancer::Rng rng(seed);
    rng.shuffle(idx);
    const int n_train = g.n * 7 / 10;

    std::vector<double> w(static_cast<std::size_t>(num_classes) * dim, 0.0);
    auto logits = [&](int node, std::vector<double>& out) {
        for (int c = 0; c < num_classes; ++c) {
            double acc = 0.0;
            for (int d = 0; d < dim; ++d) acc += w[static_cast<std::size_t>(c) * dim + d] * feats[node][d];
            out[c] = acc;
        }
    };

    std::vector<double> z(num_classes), p(num_classes);
    for (int epoch = 0; epoch < 400; ++epoch) {
        for (int t = 0; t < n_train; ++t) {
            const int node = idx[t];
            logits(node, z);
            double mx = z[0];
            for (double v : z) mx = std::max(mx, v);
            double sum = 0.0;
            for (int c = 0; c < num_classes; ++c) {
                p[c] = std::exp(z[c] - mx);
                sum += p[c];
            }
            for (int c = 0; c < num_classes; ++c) {
                const double grad = p[c] / sum - (labels[node] == c ? 1.0 : 0.0);
                for (int d = 0; d < dim; ++d) {
                    w[static_cast<std::size_t>(c) * dim + d] -= 0.05 * grad * feats[node][d];
                }
            }
        }
    }

    int correct = 0, total = 0;
    for (int t = n_train; t < g.n; ++t) {
        const int node = idx[t];
        logits(node, z);
        int best = 0;
        for (int c = 1; c < num_classes; ++c) {
            if (z[c] > z[best]) best = c;
        }
        correct += best == labels[node] ? 1 : 0;
        ++total;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

// Triangle count via the adjacency-matrix route: trace(A^3) / 6.
inline int trace_triangle_count(const geomancer::Graph& g) {
    const int n = g.n;
    std::vector<int> a(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = g.etype(i, j) > 0 ? 1 : 0;
    }
    std::vector<int> a2(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            if (a[static_cast<std::size_t>(i) * n + k] == 0) continue;
            for (int j = 0; j < n; ++j) a2[static_cast<std::size_t>(i) * n + j] += a[static_cast<std::size_t>(k) * n + j];
        }
    }
    int trace3 = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) trace3 += a2[static_cast<std::size_t>(i) * n + j] * a[static_cast<std::size_t>(j) * n + i];
    }
    return trace3 / 6;
}

}  // namespace oracles
