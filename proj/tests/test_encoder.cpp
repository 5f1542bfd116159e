#include <cmath>
#include <vector>

#include "doctest.h"
#include "geomancer/datasets.hpp"
#include "geomancer/encoder.hpp"
#include "geomancer/gyrokernel.hpp"

using namespace geomancer;

namespace {

EncoderConfig tiny_cfg(int layers = 2) {
    EncoderConfig cfg;
    cfg.node_types = 4;
    cfg.edge_types = 3;
    cfg.hidden = 4;
    cfg.latent_dim = 3;
    cfg.layers = layers;
    cfg.heads = 2;
    return cfg;
}

Graph toy_graph() {
    Graph g(3);
    g.node_type = {0, 1, 0};
    g.set_edge(0, 1, 1);
    g.set_edge(1, 2, 1);
    return g;
}

// new index of old node i is perm[i]
Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
    Graph out(g.n);
    for (int i = 0; i < g.n; ++i) out.node_type[perm[i]] = g.node_type[i];
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (i != j && g.etype(i, j) > 0) out.set_edge(perm[i], perm[j], g.etype(i, j));
        }
    }
    if (g.y_nodes) {
        std::vector<int> yn(g.n);
        for (int i = 0; i < g.n; ++i) yn[perm[i]] = (*g.y_nodes)[i];
        out.y_nodes = yn;
    }
    out.y_graph = g.y_graph;
    return out;
}

bool eig_basis_is_canonical(const Graph& g, int k) {
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    laplacian_eigs(g, std::min(k + 1, g.n), vals, vecs);
    for (std::size_t c = 1; c < vals.size(); ++c) {
        if (std::abs(vals[c] - vals[c - 1]) < 1e-6) return false;  // degenerate eigenspace
    }
    for (const auto& u : vecs) {
        std::vector<double> plus = u, minus(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) minus[i] = -u[i];
        std::sort(plus.begin(), plus.end());
        std::sort(minus.begin(), minus.end());
        bool same = true;
        for (std::size_t i = 0; i < u.size(); ++i) same = same && std::abs(plus[i] - minus[i]) < 1e-12;
        if (same) return false;  // sign-symmetric vector, sign not canonical
    }
    return true;
}

}  // namespace

TEST_CASE("rho stabilizer") {
    Tensor x = Tensor::from(1, 5, {0.0, 4.0, -4.0, 0.25, -0.25});
    Tensor y = rho(x);
    CHECK(y(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(y(0, 2) == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(y(0, 3) == doctest::Approx(0.5).epsilon(1e-9));

    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const double v = rng.gaussian() * 3.0;
        Tensor a = rho(Tensor::scalar(v));
        Tensor b = rho(Tensor::scalar(-v));
        CHECK(a.item() == doctest::Approx(-b.item()).epsilon(1e-12));
    }

    // gradient stays finite through zero and passes gradcheck away from it
    Tensor p = Tensor::param(1, 3, {1.3, -0.7, 0.4});
    CHECK(gradcheck([](const Tensor& t) { return sum_all(rho(t)); }, p, 1e-5) < 1e-4);
    Tensor zero = Tensor::param(1, 1, {0.0});
    GradTape tape;
    tape.backward(sum_all(rho(zero)));
    CHECK(std::isfinite(zero.grad_values()[0]));
}

TEST_CASE("graph layer basics") {
    Rng rng(77);
    ParamStore store;
    auto layer = GraphLayerParams::create(4, 2, rng, DType::F64, store, "l0");

    // n = 1: the single-key softmax weight is 1 regardless of the score, so
    // the attention projection w_att cannot influence the output
    Tensor zx = Tensor::from(1, 4, {0.3, -0.2, 0.5, 0.1});
    Tensor ze = Tensor::from(1, 4, {0.1, 0.4, -0.3, 0.2});
    auto out1 = graph_layer_forward(layer, zx, ze);
    auto watt = layer.w_att.values_mut();
    for (auto& v : watt) v += 1.7;
    auto out2 = graph_layer_forward(layer, zx, ze);
    for (int j = 0; j < 4; ++j) {
        CHECK(out1.z_x(0, j) == doctest::Approx(out2.z_x(0, j)).epsilon(1e-14));
        CHECK(out1.z_e(0, j) == doctest::Approx(out2.z_e(0, j)).epsilon(1e-14));
    }

    // zero weights collapse the sublayers; the wrapped output reduces to LN(input)
    ParamStore store0;
    Rng rng0(1);
    auto zl = GraphLayerParams::create(4, 2, rng0, DType::F64, store0, "z");
    for (Tensor* t : {&zl.q, &zl.k, &zl.v, &zl.e_w, &zl.e_b, &zl.e_v, &zl.w_att}) {
        auto vals = t->values_mut();
        std::fill(vals.begin(), vals.end(), 0.0);
    }
    Tensor zx2 = Tensor::from(2, 4, {1, 2, 3, 4, -1, 0, 1, 2});
    Tensor ze2 = Tensor::from(4, 4, {0.1, 0.2, 0.3, 0.4, 0, 0, 0, 0, 1, 1, 2, 2, 0.5, 0.5, 0.5, 0.6});
    auto out0 = graph_layer_forward(zl, zx2, ze2);
    Tensor ln_x = layer_norm(zx2, zl.ln_x);
    Tensor ln_e = layer_norm(ze2, zl.ln_e);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) CHECK(out0.z_x(i, j) == doctest::Approx(ln_x(i, j)).epsilon(1e-12));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(out0.z_e(i, j) == doctest::Approx(ln_e(i, j)).epsilon(1e-12));

    CHECK_THROWS(graph_layer_forward(layer, Tensor::zeros(2, 4), Tensor::zeros(3, 4)));
}

TEST_CASE("encoder determinism and reparameterization") {
    Rng rng(11);
    ParamStore store;
    auto params = EncoderParams::create(tiny_cfg(), rng, DType::F64, store);
    Graph g = toy_graph();

    auto a = encode(g, params);
    auto b = encode(g, params);
    for (std::size_t i = 0; i < a.z_x.size(); ++i) CHECK(a.z_x.values()[i] == b.z_x.values()[i]);
    for (std::size_t i = 0; i < a.z_g.size(); ++i) CHECK(a.z_g.values()[i] == b.z_g.values()[i]);

    // logvar heads are zero-initialized: sampled latents are mean + unit noise
    for (double v : a.logvar_x.values()) CHECK(v == 0.0);
    Rng noise(123);
    EncodeOptions opt;
    opt.sample = true;
    opt.noise_rng = &noise;
    auto s = encode(g, params, opt);
    double acc = 0.0, acc2 = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < s.z_x.size(); ++i) {
        const double d = s.z_x.values()[i] - a.z_x.values()[i];
        acc += d;
        acc2 += d * d;
        ++count;
    }
    for (std::size_t i = 0; i < s.z_e.size(); ++i) {
        const double d = s.z_e.values()[i] - a.z_e.values()[i];
        acc += d;
        acc2 += d * d;
        ++count;
    }
    const double var = acc2 / count - (acc / count) * (acc / count);
    CHECK(var > 0.5);
    CHECK(var < 1.6);
}

TEST_CASE("encoder permutation equivariance") {
    Rng rng(19);
    ParamStore store;
    auto cfg = tiny_cfg(3);
    auto params = EncoderParams::create(cfg, rng, DType::F64, store);

    GrammarSpec spec;
    auto graphs = gen_valence_graphs(60, spec, 5150);
    Rng perm_rng(31);
    int tested = 0;
    for (const auto& g : graphs) {
        if (tested >= 12) break;
        if (!eig_basis_is_canonical(g, cfg.eig_count)) continue;
        std::vector<int> perm(g.n);
        for (int i = 0; i < g.n; ++i) perm[i] = i;
        perm_rng.shuffle(perm);
        Graph pg = permute_graph(g, perm);
        if (!eig_basis_is_canonical(pg, cfg.eig_count)) continue;

        auto z = encode(g, params);
        auto zp = encode(pg, params);
        double worst = 0.0;
        for (int i = 0; i < g.n; ++i) {
            for (int c = 0; c < cfg.latent_dim; ++c) {
                worst = std::max(worst, std::abs(z.z_x(i, c) - zp.z_x(perm[i], c)));
            }
        }
        for (int i = 0; i < g.n; ++i) {
            for (int j = 0; j < g.n; ++j) {
                for (int c = 0; c < cfg.latent_dim; ++c) {
                    worst = std::max(worst,
                                     std::abs(z.z_e(i * g.n + j, c) - zp.z_e(perm[i] * pg.n + perm[j], c)));
                }
            }
        }
        // graph-level pooling is permutation-invariant
        for (int c = 0; c < cfg.latent_dim; ++c) {
            worst = std::max(worst, std::abs(z.z_g(0, c) - zp.z_g(0, c)));
        }
        CHECK(worst < 1e-8);
        ++tested;
    }
    CHECK(tested >= 8);
}

TEST_CASE("activations through 5 layers stay bounded") {
    Rng rng(40);
    ParamStore store;
    auto cfg = tiny_cfg(5);
    cfg.hidden = 8;
    auto params = EncoderParams::create(cfg, rng, DType::F64, store);
    GrammarSpec spec;
    for (const auto& g : gen_valence_graphs(10, spec, 777)) {
        auto z = encode(g, params);
        double peak = 0.0;
        for (double v : z.z_x.values()) peak = std::max(peak, std::abs(v));
        for (double v : z.z_e.values()) peak = std::max(peak, std::abs(v));
        CHECK(peak < 1e3);
    }
}

TEST_CASE("pool_graph") {
    Rng rng(4);
    Tensor pool_p = xavier_param(6, 3, rng, DType::F64);

    // constant rows pool to P * [v || w]
    Tensor zx = Tensor::from(4, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
    Tensor ze = Tensor::from(2, 3, {5, 6, 7, 5, 6, 7});
    Tensor zg = pool_graph(zx, ze, pool_p);
    Tensor direct = matmul(Tensor::from(1, 6, {1, 2, 3, 5, 6, 7}), pool_p);
    for (int c = 0; c < 3; ++c) CHECK(zg(0, c) == doctest::Approx(direct(0, c)).epsilon(1e-12));

    // zero latents pool to zero
    Tensor z0 = pool_graph(Tensor::zeros(3, 3), Tensor::zeros(9, 3), pool_p);
    for (int c = 0; c < 3; ++c) CHECK(z0(0, c) == 0.0);
}

TEST_CASE("encoder paths pass gradcheck through two stacked layers") {
    Rng rng(90);
    ParamStore store;
    auto params = EncoderParams::create(tiny_cfg(2), rng, DType::F64, store);
    Graph g = toy_graph();

    auto loss = [&](const Tensor&) {
        auto z = encode(g, params);
        return sum_all(mul(z.z_x, z.z_x)) + sum_all(mul(z.z_e, z.z_e)) + sum_all(mul(z.z_g, z.z_g));
    };
    CHECK(gradcheck(loss, params.layers[0].q, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.layers[0].e_w, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.layers[1].v, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.layers[1].w_att, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.layers[1].ln_e.gain, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.node_emb, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.edge_emb, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.pe_proj, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.mu_x, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, params.pool_p, 1e-5) < 1e-4);
}

TEST_CASE("geometrized latent keeps variational moments") {
    Rng rng(8);
    ParamStore store;
    auto params = EncoderParams::create(tiny_cfg(1), rng, DType::F64, store);
    auto basis = ProductManifoldBasis::create({{-1.0, 4}, {0.0, 4}}, 3, 2, 1.0, 3, rng, DType::F64, store);
    Graph g = toy_graph();
    auto z = encode(g, params);
    auto zg = geometrize_latent(z, basis.project());
    CHECK(zg.z_x.cols() == 8);
    CHECK(zg.z_e.cols() == 8);
    CHECK(zg.z_g.cols() == 8);
    CHECK(zg.mu_x.cols() == 3);  // untouched, still the KL inputs
}
