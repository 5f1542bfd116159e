#pragma once

#include <string>
#include <vector>

#include "geomancer/graph.hpp"
#include "geomancer/params.hpp"
#include "geomancer/rng.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

// rho(x) = relu(x)^(1/2) - relu(-x)^(1/2), the signed-sqrt stabilizer.
Tensor rho(const Tensor& x);

struct LayerNormParams {
    Tensor gain;  // [1 x h]
    Tensor bias;  // [1 x h]
};
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

// Edge-enhanced attention layer over dense ordered pairs. Node rows are
// [n x h]; edge rows are [n^2 x h] in row-major pair order. Shared between the
// encoder and the diffusion denoiser.
struct GraphLayerParams {
    int hidden = 0;
    int heads = 1;
    Tensor q, k, v, e_w, e_b, e_v;  // [h x h]
    Tensor w_att;                   // [h x heads]
    LayerNormParams ln_x, ln_e;

    static GraphLayerParams create(int hidden, int heads, Rng& rng, DType dt, ParamStore& store,
                                   const std::string& prefix);
};

struct GraphLayerOut {
    Tensor z_x;
    Tensor z_e;
};
GraphLayerOut graph_layer_forward(const GraphLayerParams& p, const Tensor& z_x, const Tensor& z_e);

// pair p = i * n + j
std::vector<int> pair_row_index(int n);
std::vector<int> pair_col_index(int n);

// Dense symmetric eigensolver (cyclic Jacobi); returns eigenvalues ascending
// and matching eigenvectors as columns.
void symmetric_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors);

struct EncoderConfig {
    int node_types = 4;
    int edge_types = 3;
    int hidden = 64;
    int latent_dim = 16;
    int layers = 5;
    int heads = 4;
    bool positional = true;
    int degree_cap = 16;  // one-hot goes 0..cap
    int eig_count = 8;    // smallest sym-normalized-Laplacian eigenvectors
};

// Structural positional features [n x (cap+1+eig_count)]: degree one-hot plus
// eigenvector entries with canonical sign; flip_rng applies the per-epoch
// random sign flip used as a training augmentation.
Tensor positional_features(const Graph& g, const EncoderConfig& cfg, DType dt,
                           Rng* flip_rng = nullptr);

// Smallest-k eigenpairs of the symmetric normalized Laplacian (test hook).
void laplacian_eigs(const Graph& g, int k, std::vector<double>& values,
                    std::vector<std::vector<double>>& vectors);

struct EncoderParams {
    EncoderConfig cfg;
    Tensor node_emb;  // [K_n x h]
    Tensor edge_emb;  // [K_e x h]
    Tensor pe_proj;   // [(cap+1+eig_count) x h]
    std::vector<GraphLayerParams> layers;
    Tensor mu_x, logvar_x;  // [h x d]
    Tensor mu_e, logvar_e;  // [h x d]
    Tensor pool_p;          // [2d x d]

    static EncoderParams create(const EncoderConfig& cfg, Rng& rng, DType dt, ParamStore& store,
                                const std::string& prefix = "enc");
};

// Per-graph latent triple. Widths are latent_dim straight out of encode() and
// the total gyrokernel feature width after geometrize_latent().
struct LatentState {
    Tensor z_x;  // [n x d]
    Tensor z_e;  // [n^2 x d]
    Tensor z_g;  // [1 x d]
    Tensor mu_x, logvar_x;
    Tensor mu_e, logvar_e;
};

struct EncodeOptions {
    bool sample = false;   // reparameterized draw (AE training); mean otherwise
    Rng* noise_rng = nullptr;
    Rng* flip_rng = nullptr;  // eigenvector sign augmentation
};

LatentState encode(const Graph& g, const EncoderParams& params, const EncodeOptions& opt = {});

Tensor pool_graph(const Tensor& z_x, const Tensor& z_e, const Tensor& pool_p);

LatentState geometrize_latent(const LatentState& z, const Tensor& v_bar);

}  // namespace geomancer
