#include "geomancer/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace geomancer {

DecoupledLatent decouple(const Tensor& z, const std::vector<int>& widths) {
    int total = 0;
    for (int w : widths) total += w;
    if (total != z.cols()) throw std::invalid_argument("decouple: widths do not match latent");
    return {split(z, widths, 1)};
}

TaskHead TaskHead::create(TaskKind task, const std::vector<int>& widths, int head_hidden,
                          int out_dim, Rng& rng, DType dt, ParamStore& store,
                          const std::string& prefix) {
    TaskHead head;
    head.task = task;
    head.widths = widths;
    for (std::size_t b = 0; b < widths.size(); ++b) {
        head.block_proj.push_back(store.add(prefix + ".proj" + std::to_string(b),
                                            xavier_param(widths[b], head_hidden, rng, dt)));
    }
    head.block_logits = store.add(prefix + ".block_logits",
                                  zeros_param(1, static_cast<int>(widths.size()), dt));
    head.out_w = store.add(prefix + ".out_w", xavier_param(head_hidden, out_dim, rng, dt));
    head.out_b = store.add(prefix + ".out_b", zeros_param(1, out_dim, dt));
    return head;
}

std::vector<double> TaskHead::block_weights() const {
    Tensor w = softmax(block_logits, 1);
    return std::vector<double>(w.values().begin(), w.values().end());
}

Tensor head_forward(const TaskHead& head, const DecoupledLatent& latent) {
    if (latent.blocks.size() != head.block_proj.size()) {
        throw std::invalid_argument("head_forward: block count mismatch");
    }
    Tensor weights = softmax(head.block_logits, 1);  // [1 x B]
    Tensor combined;
    for (std::size_t b = 0; b < latent.blocks.size(); ++b) {
        if (latent.blocks[b].cols() != head.widths[b]) {
            throw std::invalid_argument("head_forward: block width mismatch");
        }
        Tensor w_b = split(weights, std::vector<int>(latent.blocks.size(), 1), 1)[b];
        Tensor term = mul(matmul(latent.blocks[b], head.block_proj[b]), w_b);
        combined = b == 0 ? term : add(combined, term);
    }
    return add(matmul(combined, head.out_w), head.out_b);
}

Tensor symmetrize_edge_logits(const Tensor& edge_logits, int n) {
    if (edge_logits.rows() != n * n) throw std::invalid_argument("symmetrize: rows must be n^2");
    std::vector<int> swapped(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) swapped[static_cast<std::size_t>(i) * n + j] = j * n + i;
    }
    return mul(add(edge_logits, gather_rows(edge_logits, swapped)), Tensor::scalar(0.5, edge_logits.dtype()));
}

ProductEigenResult verify_product_eigen(int k1, int k2, int grid) {
    if (grid < 64) throw std::invalid_argument("verify_product_eigen: grid must be >= 64");
    const double pi = std::acos(-1.0);
    const double h = 2.0 * pi / grid;
    std::vector<double> g(static_cast<std::size_t>(grid) * grid);
    for (int i = 0; i < grid; ++i) {
        const double c1 = std::cos(k1 * i * h);
        for (int j = 0; j < grid; ++j) {
            g[static_cast<std::size_t>(i) * grid + j] = c1 * std::cos(k2 * j * h);
        }
    }
    auto wrap = [grid](int v) { return (v + grid) % grid; };
    double num = 0.0, den = 0.0, res = 0.0;
    std::vector<double> lap(g.size());
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double center = g[static_cast<std::size_t>(i) * grid + j];
            const double sum_nb = g[static_cast<std::size_t>(wrap(i - 1)) * grid + j] +
                                  g[static_cast<std::size_t>(wrap(i + 1)) * grid + j] +
                                  g[static_cast<std::size_t>(i) * grid + wrap(j - 1)] +
                                  g[static_cast<std::size_t>(i) * grid + wrap(j + 1)];
            // Delta = -div grad: positive spectrum on the torus
            const double l = (4.0 * center - sum_nb) / (h * h);
            lap[static_cast<std::size_t>(i) * grid + j] = l;
            num += l * center;
            den += center * center;
        }
    }
    ProductEigenResult out;
    out.expected = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
    out.measured = den > 0 ? num / den : 0.0;
    double gnorm = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const double r = lap[idx] - out.measured * g[idx];
        res += r * r;
        gnorm += g[idx] * g[idx];
    }
    out.residual = gnorm > 0 ? std::sqrt(res / gnorm) : 0.0;
    return out;
}

}  // namespace geomancer
