#pragma once

#include "geomancer/graph.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

struct LossReport {
    double total = 0.0;
    double l_tgt = 0.0;
    double l_reg = 0.0;
};

// KL(q || N(0, I)) = 0.5 * sum_dims(mu^2 + e^logvar - 1 - logvar), mean over rows.
Tensor kl_reg(const Tensor& mu, const Tensor& logvar);

// Mean categorical cross-entropy of one label per row (stable log-sum-exp).
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels);

// Node CE plus edge CE over unordered pairs (diagonal excluded); edge type 0
// ("no edge") is an ordinary class. edge_logits are the symmetrized [n^2 x K_e].
Tensor reconstruction_loss(const Tensor& node_logits, const Tensor& edge_logits, const Graph& g);

Tensor mse(const Tensor& pred, const Tensor& truth);

// Fraction of argmax hits; used to track memorization.
double node_accuracy(const Tensor& node_logits, const Graph& g);
double edge_accuracy(const Tensor& edge_logits, const Graph& g);

}  // namespace geomancer
