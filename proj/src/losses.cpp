#include "geomancer/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace geomancer {

Tensor kl_reg(const Tensor& mu, const Tensor& logvar) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
        throw std::invalid_argument("kl_reg: shape mismatch");
    }
    Tensor per_row = sum_axis(mul(mu, mu) + exp(logvar) - 1.0 - logvar, 1) * 0.5;
    return mean_all(per_row);
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels) {
    const int rows = logits.rows(), k = logits.cols();
    if (static_cast<int>(labels.size()) != rows) {
        throw std::invalid_argument("cross_entropy: label count mismatch");
    }
    std::vector<double> onehot(static_cast<std::size_t>(rows) * k, 0.0);
    std::vector<double> rowmax(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw std::out_of_range("cross_entropy: label out of range");
        onehot[static_cast<std::size_t>(i) * k + labels[i]] = 1.0;
        double mx = logits(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
        rowmax[i] = mx;
    }
    const DType dt = logits.dtype();
    Tensor hot = Tensor::from(rows, k, std::move(onehot), dt);
    Tensor shift = Tensor::from(rows, 1, std::move(rowmax), dt);  // constant w.r.t. gradients
    Tensor lse = add(log(sum_axis(exp(sub(logits, shift)), 1)), shift);
    Tensor picked = sum_axis(mul(logits, hot), 1);
    return mean_all(sub(lse, picked));
}

Tensor reconstruction_loss(const Tensor& node_logits, const Tensor& edge_logits, const Graph& g) {
    Tensor node_ce = cross_entropy_rows(node_logits, g.node_type);
    if (g.n < 2) return node_ce;
    std::vector<int> pair_rows;
    std::vector<int> pair_labels;
    pair_rows.reserve(static_cast<std::size_t>(g.n) * (g.n - 1) / 2);
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            pair_rows.push_back(i * g.n + j);
            pair_labels.push_back(g.etype(i, j));
        }
    }
    Tensor upper = gather_rows(edge_logits, pair_rows);
    return add(node_ce, cross_entropy_rows(upper, pair_labels));
}

Tensor mse(const Tensor& pred, const Tensor& truth) {
    Tensor diff = sub(pred, truth);
    return mean_all(mul(diff, diff));
}

namespace {
int argmax_row(const Tensor& t, int row) {
    int best = 0;
    for (int j = 1; j < t.cols(); ++j) {
        if (t(row, j) > t(row, best)) best = j;
    }
    return best;
}
}  // namespace

double node_accuracy(const Tensor& node_logits, const Graph& g) {
    int hits = 0;
    for (int i = 0; i < g.n; ++i) hits += argmax_row(node_logits, i) == g.node_type[i] ? 1 : 0;
    return static_cast<double>(hits) / g.n;
}

double edge_accuracy(const Tensor& edge_logits, const Graph& g) {
    if (g.n < 2) return 1.0;
    int hits = 0, total = 0;
    for (int i = 0; i < g.n; ++i) {
        for (int j = i + 1; j < g.n; ++j) {
            hits += argmax_row(edge_logits, i * g.n + j) == g.etype(i, j) ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(hits) / total;
}

}  // namespace geomancer
