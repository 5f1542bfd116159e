#include "geomancer/encoder.hpp"

#include "geomancer/gyrokernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geomancer {

Tensor rho(const Tensor& x) {
    // the 1e-24 keeps the sqrt gradient finite at exactly 0
    return sqrt(relu(x) + 1e-24) - sqrt(relu(neg(x)) + 1e-24);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
    Tensor centered = x - mean_axis(x, 1);
    Tensor var = mean_axis(mul(centered, centered), 1);
    Tensor normed = divide(centered, sqrt(var + 1e-5));
    return add(mul(normed, p.gain), p.bias);
}

GraphLayerParams GraphLayerParams::create(int hidden, int heads, Rng& rng, DType dt,
                                          ParamStore& store, const std::string& prefix) {
    if (hidden % heads != 0) throw std::invalid_argument("graph layer: heads must divide hidden");
    GraphLayerParams p;
    p.hidden = hidden;
    p.heads = heads;
    p.q = store.add(prefix + ".q", xavier_param(hidden, hidden, rng, dt));
    p.k = store.add(prefix + ".k", xavier_param(hidden, hidden, rng, dt));
    p.v = store.add(prefix + ".v", xavier_param(hidden, hidden, rng, dt));
    p.e_w = store.add(prefix + ".e_w", xavier_param(hidden, hidden, rng, dt));
    p.e_b = store.add(prefix + ".e_b", xavier_param(hidden, hidden, rng, dt));
    p.e_v = store.add(prefix + ".e_v", xavier_param(hidden, hidden, rng, dt));
    p.w_att = store.add(prefix + ".w_att", xavier_param(hidden, heads, rng, dt));
    p.ln_x = {store.add(prefix + ".ln_x.gain", Tensor::param(1, hidden, std::vector<double>(hidden, 1.0), dt)),
              store.add(prefix + ".ln_x.bias", zeros_param(1, hidden, dt))};
    p.ln_e = {store.add(prefix + ".ln_e.gain", Tensor::param(1, hidden, std::vector<double>(hidden, 1.0), dt)),
              store.add(prefix + ".ln_e.bias", zeros_param(1, hidden, dt))};
    return p;
}

std::vector<int> pair_row_index(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(i) * n + j] = i;
    }
    return idx;
}

std::vector<int> pair_col_index(int n) {
    std::vector<int> idx(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(i) * n + j] = j;
    }
    return idx;
}

namespace {

// [n x n^2] block summation matrix: out row i sums pair rows i*n .. i*n+n-1
Tensor block_sum_selector(int n, DType dt) {
    std::vector<double> sel(static_cast<std::size_t>(n) * n * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            sel[static_cast<std::size_t>(i) * n * n + static_cast<std::size_t>(i) * n + j] = 1.0;
        }
    }
    return Tensor::from(n, n * n, std::move(sel), dt);
}

}  // namespace

GraphLayerOut graph_layer_forward(const GraphLayerParams& p, const Tensor& z_x, const Tensor& z_e) {
    const int n = z_x.rows();
    if (z_e.rows() != n * n) throw std::invalid_argument("graph layer: edge rows must be n^2");
    if (z_x.cols() != p.hidden || z_e.cols() != p.hidden) {
        throw std::invalid_argument("graph layer: hidden width mismatch");
    }
    const auto rows_i = pair_row_index(n);
    const auto cols_j = pair_col_index(n);

    // edge update: sigma(rho((Q z_i) .* (K z_j) .* (E_w z_e)) + E_b z_e)
    Tensor qp = gather_rows(matmul(z_x, p.q), rows_i);
    Tensor kp = gather_rows(matmul(z_x, p.k), cols_j);
    Tensor gated = rho(mul(mul(qp, kp), matmul(z_e, p.e_w)));
    Tensor edge_new = relu(add(gated, matmul(z_e, p.e_b)));
    Tensor z_e_out = layer_norm(add(z_e, edge_new), p.ln_e);

    // attention over j per head, scores from the updated edge latents
    Tensor scores = matmul(z_e_out, p.w_att);  // [n^2 x heads]
    std::vector<int> ones(p.heads, 1);
    auto head_scores = split(scores, ones, 1);
    std::vector<Tensor> alphas;
    alphas.reserve(p.heads);
    for (auto& s : head_scores) {
        alphas.push_back(reshape(softmax(reshape(s, n, n), 1), n * n, 1));
    }

    // node update: sum_j alpha_ij (V z_j + E_v z_e_ij)
    Tensor contrib = add(gather_rows(matmul(z_x, p.v), cols_j), matmul(z_e_out, p.e_v));
    const int slice = p.hidden / p.heads;
    Tensor weighted;
    if (p.heads == 1) {
        weighted = mul(contrib, alphas[0]);
    } else {
        auto pieces = split(contrib, std::vector<int>(p.heads, slice), 1);
        std::vector<Tensor> scaled;
        scaled.reserve(p.heads);
        for (int h = 0; h < p.heads; ++h) scaled.push_back(mul(pieces[h], alphas[h]));
        weighted = concat(scaled, 1);
    }
    Tensor node_new = matmul(block_sum_selector(n, z_x.dtype()), weighted);
    Tensor z_x_out = layer_norm(add(z_x, node_new), p.ln_x);
    return {z_x_out, z_e_out};
}

void symmetric_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors) {
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto at = [&](std::vector<double>& m, int r, int c) -> double& {
        return m[static_cast<std::size_t>(r) * n + c];
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) off += at(a, i, j) * at(a, i, j);
        }
        if (off < 1e-22) break;
        for (int pi = 0; pi < n; ++pi) {
            for (int qi = pi + 1; qi < n; ++qi) {
                const double apq = at(a, pi, qi);
                if (std::abs(apq) < 1e-15) continue;
                const double app = at(a, pi, pi), aqq = at(a, qi, qi);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int r = 0; r < n; ++r) {
                    const double arp = at(a, r, pi), arq = at(a, r, qi);
                    at(a, r, pi) = c * arp - s * arq;
                    at(a, r, qi) = s * arp + c * arq;
                }
                for (int r = 0; r < n; ++r) {
                    const double apr = at(a, pi, r), aqr = at(a, qi, r);
                    at(a, pi, r) = c * apr - s * aqr;
                    at(a, qi, r) = s * apr + c * aqr;
                }
                for (int r = 0; r < n; ++r) {
                    const double vrp = at(v, r, pi), vrq = at(v, r, qi);
                    at(v, r, pi) = c * vrp - s * vrq;
                    at(v, r, qi) = s * vrp + c * vrq;
                }
            }
        }
    }
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int l, int r) { return at(a, l, l) < at(a, r, r); });
    eigenvalues.resize(n);
    eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int c = 0; c < n; ++c) {
        eigenvalues[c] = at(a, order[c], order[c]);
        for (int r = 0; r < n; ++r) {
            eigenvectors[static_cast<std::size_t>(r) * n + c] = at(v, r, order[c]);
        }
    }
}

void laplacian_eigs(const Graph& g, int k, std::vector<double>& values,
                    std::vector<std::vector<double>>& vectors) {
    const int n = g.n;
    std::vector<double> lap(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> dinv(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const int d = g.degree(i);
        dinv[i] = d > 0 ? 1.0 / std::sqrt(static_cast<double>(d)) : 0.0;
    }
    for (int i = 0; i < n; ++i) {
        lap[static_cast<std::size_t>(i) * n + i] = 1.0;
        for (int j = 0; j < n; ++j) {
            if (g.etype(i, j) > 0) {
                lap[static_cast<std::size_t>(i) * n + j] -= dinv[i] * dinv[j];
            }
        }
    }
    std::vector<double> evals, evecs;
    symmetric_eigen(std::move(lap), n, evals, evecs);
    const int take = std::min(k, n);
    values.assign(evals.begin(), evals.begin() + take);
    vectors.assign(take, std::vector<double>(n));
    for (int c = 0; c < take; ++c) {
        for (int r = 0; r < n; ++r) vectors[c][r] = evecs[static_cast<std::size_t>(r) * n + c];
    }
}

namespace {

// Sign chosen by comparing the sorted entry multisets of +u and -u, which is
// permutation-invariant. Ambiguous (sign-symmetric) vectors are left as-is.
void canonicalize_sign(std::vector<double>& u) {
    std::vector<double> plus = u, minus(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) minus[i] = -u[i];
    std::sort(plus.begin(), plus.end(), std::greater<>());
    std::sort(minus.begin(), minus.end(), std::greater<>());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(plus[i] - minus[i]) > 1e-12) {
            if (minus[i] > plus[i]) {
                for (auto& e : u) e = -e;
            }
            return;
        }
    }
}

}  // namespace

Tensor positional_features(const Graph& g, const EncoderConfig& cfg, DType dt, Rng* flip_rng) {
    const int n = g.n;
    const int deg_w = cfg.degree_cap + 1;
    const int width = deg_w + cfg.eig_count;
    std::vector<double> pe(static_cast<std::size_t>(n) * width, 0.0);
    for (int i = 0; i < n; ++i) {
        const int d = std::min(g.degree(i), cfg.degree_cap);
        pe[static_cast<std::size_t>(i) * width + d] = 1.0;
    }
    std::vector<double> evals;
    std::vector<std::vector<double>> evecs;
    laplacian_eigs(g, cfg.eig_count, evals, evecs);
    for (std::size_t c = 0; c < evecs.size(); ++c) {
        canonicalize_sign(evecs[c]);
        const double flip = flip_rng && flip_rng->uniform() < 0.5 ? -1.0 : 1.0;
        for (int r = 0; r < n; ++r) {
            pe[static_cast<std::size_t>(r) * width + deg_w + c] = flip * evecs[c][r];
        }
    }
    return Tensor::from(n, width, std::move(pe), dt);
}

EncoderParams EncoderParams::create(const EncoderConfig& cfg, Rng& rng, DType dt, ParamStore& store,
                                    const std::string& prefix) {
    EncoderParams p;
    p.cfg = cfg;
    p.node_emb = store.add(prefix + ".node_emb", gaussian_param(cfg.node_types, cfg.hidden, 0.5, rng, dt));
    p.edge_emb = store.add(prefix + ".edge_emb", gaussian_param(cfg.edge_types, cfg.hidden, 0.5, rng, dt));
    const int pe_width = cfg.degree_cap + 1 + cfg.eig_count;
    p.pe_proj = store.add(prefix + ".pe_proj", xavier_param(pe_width, cfg.hidden, rng, dt));
    for (int l = 0; l < cfg.layers; ++l) {
        p.layers.push_back(GraphLayerParams::create(cfg.hidden, cfg.heads, rng, dt, store,
                                                    prefix + ".layer" + std::to_string(l)));
    }
    p.mu_x = store.add(prefix + ".mu_x", xavier_param(cfg.hidden, cfg.latent_dim, rng, dt));
    p.logvar_x = store.add(prefix + ".logvar_x", zeros_param(cfg.hidden, cfg.latent_dim, dt));
    p.mu_e = store.add(prefix + ".mu_e", xavier_param(cfg.hidden, cfg.latent_dim, rng, dt));
    p.logvar_e = store.add(prefix + ".logvar_e", zeros_param(cfg.hidden, cfg.latent_dim, dt));
    p.pool_p = store.add(prefix + ".pool_p", xavier_param(2 * cfg.latent_dim, cfg.latent_dim, rng, dt));
    return p;
}

Tensor pool_graph(const Tensor& z_x, const Tensor& z_e, const Tensor& pool_p) {
    Tensor pooled = concat({mean_axis(z_x, 0), mean_axis(z_e, 0)}, 1);
    return matmul(pooled, pool_p);
}

namespace {

Tensor gaussian_like(int rows, int cols, DType dt, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = rng.gaussian();
    return Tensor::from(rows, cols, std::move(v), dt);
}

}  // namespace

LatentState encode(const Graph& g, const EncoderParams& params, const EncodeOptions& opt) {
    const auto& cfg = params.cfg;
    const int n = g.n;
    for (int t : g.node_type) {
        if (t < 0 || t >= cfg.node_types) throw std::invalid_argument("encode: node type out of range");
    }
    const DType dt = params.node_emb.dtype();

    Tensor z_x = gather_rows(params.node_emb, g.node_type);
    if (cfg.positional) {
        Tensor pe = positional_features(g, cfg, dt, opt.flip_rng);
        z_x = add(z_x, matmul(pe, params.pe_proj));
    }
    std::vector<int> etypes(g.edge_type.begin(), g.edge_type.end());
    for (int t : etypes) {
        if (t < 0 || t >= cfg.edge_types) throw std::invalid_argument("encode: edge type out of range");
    }
    Tensor z_e = gather_rows(params.edge_emb, etypes);

    for (const auto& layer : params.layers) {
        auto out = graph_layer_forward(layer, z_x, z_e);
        z_x = out.z_x;
        z_e = out.z_e;
    }

    LatentState state;
    state.mu_x = matmul(z_x, params.mu_x);
    state.logvar_x = matmul(z_x, params.logvar_x);
    state.mu_e = matmul(z_e, params.mu_e);
    state.logvar_e = matmul(z_e, params.logvar_e);

    if (opt.sample) {
        if (!opt.noise_rng) throw std::invalid_argument("encode: sampling requires a noise rng");
        Tensor eps_x = gaussian_like(n, cfg.latent_dim, dt, *opt.noise_rng);
        Tensor eps_e = gaussian_like(n * n, cfg.latent_dim, dt, *opt.noise_rng);
        state.z_x = add(state.mu_x, mul(exp(state.logvar_x * 0.5), eps_x));
        state.z_e = add(state.mu_e, mul(exp(state.logvar_e * 0.5), eps_e));
    } else {
        state.z_x = state.mu_x;
        state.z_e = state.mu_e;
    }
    state.z_g = pool_graph(state.z_x, state.z_e, params.pool_p);
    return state;
}

LatentState geometrize_latent(const LatentState& z, const Tensor& v_bar) {
    LatentState out = z;
    out.z_x = geometrize(z.z_x, v_bar);
    out.z_e = geometrize(z.z_e, v_bar);
    out.z_g = geometrize(z.z_g, v_bar);
    return out;
}

}  // namespace geomancer
