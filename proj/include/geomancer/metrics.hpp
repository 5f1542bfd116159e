#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "geomancer/datasets.hpp"
#include "geomancer/graph.hpp"

namespace geomancer {

// 1-WL color-refinement fingerprint over (node type, edge type multiset),
// iterated to stability. Isomorphic graphs always share a key; rare
// WL-indistinguishable non-isomorphic pairs are separated downstream by the
// exact test. Supported for n <= 12 only.
std::uint64_t canonical_key(const Graph& g);

// Exact backtracking isomorphism with WL/degree pruning.
bool isomorphic(const Graph& a, const Graph& b);

double validity(const std::vector<Graph>& graphs, const GrammarSpec& spec);
std::vector<Graph> valid_subset(const std::vector<Graph>& graphs, const GrammarSpec& spec);

// uniqueness = distinct isomorphism classes / |valid|
double uniqueness(const std::vector<Graph>& valid_graphs);
// novelty = fraction of valid graphs with no isomorphic training graph
double novelty(const std::vector<Graph>& valid_graphs, const std::vector<Graph>& train_graphs);

// Squared MMD with a Gaussian kernel (bandwidth = median pairwise distance)
// over degree histograms (length 5) and clustering-coefficient histograms
// (10 bins). Returns (mmd_degree, mmd_clustering).
std::pair<double, double> mmd_stats(const std::vector<Graph>& a, const std::vector<Graph>& b);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);
double mae(const std::vector<double>& preds, const std::vector<double>& targets);

struct GenReport {
    double validity = 0.0;
    double uniqueness = 0.0;
    double novelty = 0.0;
    double mmd_degree = 0.0;
    double mmd_clustering = 0.0;
};

GenReport evaluate_generation(const std::vector<Graph>& generated, const std::vector<Graph>& train,
                              const GrammarSpec& spec);

}  // namespace geomancer
