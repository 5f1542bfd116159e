#pragma once

#include <string>
#include <vector>

#include "geomancer/graph.hpp"
#include "geomancer/params.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

// Per-component column slices of a geometrized latent; concatenating the
// blocks restores the input exactly.
struct DecoupledLatent {
    std::vector<Tensor> blocks;
};

DecoupledLatent decouple(const Tensor& z, const std::vector<int>& widths);

enum class TaskKind { ReconstructNodes, ReconstructEdges, NodeClass, GraphRegress, GraphClass };

// Task head over decoupled blocks: per-block linear projections combined by a
// learned softmax weight vector, then an output projection. The block weights
// are the per-manifold importances exported for inspection.
struct TaskHead {
    TaskKind task = TaskKind::ReconstructNodes;
    std::vector<int> widths;
    std::vector<Tensor> block_proj;  // [m_i x h]
    Tensor block_logits;             // [1 x B]
    Tensor out_w;                    // [h x out_dim]
    Tensor out_b;                    // [1 x out_dim]

    static TaskHead create(TaskKind task, const std::vector<int>& widths, int head_hidden,
                           int out_dim, Rng& rng, DType dt, ParamStore& store,
                           const std::string& prefix);

    std::vector<double> block_weights() const;  // softmax of block_logits
};

Tensor head_forward(const TaskHead& head, const DecoupledLatent& latent);

// Average logits of ordered pairs (i,j) and (j,i) so edge predictions are
// symmetric by construction.
Tensor symmetrize_edge_logits(const Tensor& edge_logits, int n);

// Finite-difference check that Laplacian eigenvalues add across product
// factors: g = cos(k1 t1) cos(k2 t2) on the flat torus has eigenvalue
// k1^2 + k2^2. Returns the least-squares eigenvalue of the 5-point stencil.
struct ProductEigenResult {
    double measured = 0.0;
    double expected = 0.0;
    double residual = 0.0;  // ||lap(g) - measured g|| / ||g||
};
ProductEigenResult verify_product_eigen(int k1, int k2, int grid);

}  // namespace geomancer
