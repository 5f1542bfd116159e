#include <cmath>
#include <vector>

#include "doctest.h"
#include "geomancer/decoder.hpp"
#include "geomancer/losses.hpp"

using namespace geomancer;

TEST_CASE("decouple") {
    Rng rng(1);
    std::vector<double> v(10);
    for (auto& x : v) x = rng.gaussian();
    Tensor z = Tensor::from(2, 5, v);

    auto single = decouple(z, {5});
    REQUIRE(single.blocks.size() == 1);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 5; ++j) CHECK(single.blocks[0](i, j) == z(i, j));

    auto parts = decouple(z, {2, 3});
    CHECK(parts.blocks[0](1, 1) == z(1, 1));
    CHECK(parts.blocks[1](0, 0) == z(0, 2));
    CHECK(parts.blocks[1](1, 2) == z(1, 4));

    // concat restores the latent bit-exactly
    Tensor back = concat(parts.blocks, 1);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 5; ++j) CHECK(back(i, j) == z(i, j));

    CHECK_THROWS(decouple(z, {2, 2}));
}

TEST_CASE("task head combination") {
    Rng rng(5);
    ParamStore store;
    auto head = TaskHead::create(TaskKind::GraphRegress, {3, 3, 3}, 4, 1, rng, DType::F64, store, "h");

    auto weights = head.block_weights();
    double sum = 0.0;
    for (double w : weights) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);

    // saturate attention onto block 1: other blocks stop mattering
    {
        auto lv = head.block_logits.values_mut();
        lv[0] = 0.0;
        lv[1] = 200.0;
        lv[2] = 0.0;
    }
    Tensor b0 = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor b1 = Tensor::from(2, 3, {-1, 0, 1, 2, -2, 0.5});
    Tensor b2 = Tensor::from(2, 3, {9, 9, 9, 9, 9, 9});
    Tensor out_a = head_forward(head, {{b0, b1, b2}});
    Tensor out_b = head_forward(head, {{mul(b0, Tensor::scalar(3.0)), b1, add(b2, Tensor::scalar(1.0))}});
    for (int i = 0; i < 2; ++i) CHECK(out_a(i, 0) == doctest::Approx(out_b(i, 0)).epsilon(1e-12));

    // zero blocks give the output bias
    {
        auto lv = head.block_logits.values_mut();
        lv[1] = 0.0;
    }
    Tensor zero_out = head_forward(head, {{Tensor::zeros(2, 3), Tensor::zeros(2, 3), Tensor::zeros(2, 3)}});
    for (int i = 0; i < 2; ++i) CHECK(zero_out(i, 0) == doctest::Approx(head.out_b(0, 0)));

    // identical blocks with shared projections: uniform weights match any collapse
    ParamStore store2;
    Rng rng2(6);
    auto head2 = TaskHead::create(TaskKind::GraphRegress, {3, 3}, 4, 1, rng2, DType::F64, store2, "h2");
    {
        auto p0 = head2.block_proj[0].values_mut();
        auto p1 = head2.block_proj[1].values_mut();
        for (std::size_t i = 0; i < p0.size(); ++i) p1[i] = p0[i];
    }
    Tensor same = Tensor::from(2, 3, {0.2, -0.4, 1.0, 0.7, 0.1, -0.9});
    Tensor uniform = head_forward(head2, {{same, same}});
    {
        auto lv = head2.block_logits.values_mut();
        lv[0] = 300.0;
    }
    Tensor collapsed = head_forward(head2, {{same, same}});
    for (int i = 0; i < 2; ++i) CHECK(uniform(i, 0) == doctest::Approx(collapsed(i, 0)).epsilon(1e-10));

    CHECK_THROWS(head_forward(head, {{b0, b1}}));
}

TEST_CASE("edge logit symmetrization") {
    Rng rng(2);
    std::vector<double> v(9 * 2);
    for (auto& x : v) x = rng.gaussian();
    Tensor logits = Tensor::from(9, 2, v);
    Tensor sym = symmetrize_edge_logits(logits, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int c = 0; c < 2; ++c) {
                CHECK(sym(i * 3 + j, c) == doctest::Approx(sym(j * 3 + i, c)).epsilon(1e-15));
                CHECK(sym(i * 3 + j, c) ==
                      doctest::Approx(0.5 * (logits(i * 3 + j, c) + logits(j * 3 + i, c))));
            }
        }
    }
}

TEST_CASE("decoder head passes gradcheck end-to-end") {
    Rng rng(77);
    ParamStore store;
    auto head = TaskHead::create(TaskKind::NodeClass, {4, 4}, 5, 3, rng, DType::F64, store, "h");
    Tensor latent = gaussian_param(3, 8, 1.0, rng, DType::F64);

    auto loss = [&](const Tensor&) {
        auto blocks = decouple(latent, {4, 4});
        Tensor out = head_forward(head, blocks);
        return sum_all(mul(out, out));
    };
    CHECK(gradcheck(loss, latent, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, head.block_proj[0], 1e-5) < 1e-4);
    CHECK(gradcheck(loss, head.block_logits, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, head.out_w, 1e-5) < 1e-4);
    CHECK(gradcheck(loss, head.out_b, 1e-5) < 1e-4);
}

TEST_CASE("product eigenfunction additivity on the torus") {
    auto zero = verify_product_eigen(0, 0, 64);
    CHECK(zero.expected == 0.0);
    CHECK(std::abs(zero.measured) < 1e-10);

    auto r12 = verify_product_eigen(1, 2, 256);
    CHECK(r12.expected == 5.0);
    CHECK(std::abs(r12.measured - r12.expected) / r12.expected < 0.01);

    auto r34 = verify_product_eigen(3, 4, 256);
    CHECK(r34.expected == 25.0);
    CHECK(std::abs(r34.measured - r34.expected) / r34.expected < 0.01);

    // additivity: the product eigenvalue is the sum of the factor eigenvalues
    auto k10 = verify_product_eigen(1, 0, 256);
    auto k02 = verify_product_eigen(0, 2, 256);
    CHECK(std::abs(r12.measured - (k10.measured + k02.measured)) / r12.expected < 0.01);
    CHECK(r12.residual < 1e-6);

    CHECK_THROWS(verify_product_eigen(1, 1, 32));
}

TEST_CASE("kl regularizer") {
    Tensor mu0 = Tensor::zeros(3, 2);
    Tensor lv0 = Tensor::zeros(3, 2);
    CHECK(kl_reg(mu0, lv0).item() == doctest::Approx(0.0));

    Tensor mu1 = Tensor::from(1, 1, {1.0});
    CHECK(kl_reg(mu1, Tensor::zeros(1, 1)).item() == doctest::Approx(0.5));

    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        Tensor mu = Tensor::from(2, 3, {rng.gaussian(), rng.gaussian(), rng.gaussian(),
                                        rng.gaussian(), rng.gaussian(), rng.gaussian()});
        Tensor lv = Tensor::from(2, 3, {rng.gaussian(), rng.gaussian(), rng.gaussian(),
                                        rng.gaussian(), rng.gaussian(), rng.gaussian()});
        CHECK(kl_reg(mu, lv).item() >= -1e-12);
    }

    Tensor mu_p = gaussian_param(2, 3, 1.0, rng, DType::F64);
    Tensor lv_p = gaussian_param(2, 3, 0.5, rng, DType::F64);
    CHECK(gradcheck([&](const Tensor&) { return kl_reg(mu_p, lv_p); }, mu_p, 1e-5) < 1e-4);
    CHECK(gradcheck([&](const Tensor&) { return kl_reg(mu_p, lv_p); }, lv_p, 1e-5) < 1e-4);
}

TEST_CASE("cross entropy") {
    // saturated correct logits
    Tensor sat = Tensor::from(2, 3, {20, -20, -20, -20, 20, -20});
    CHECK(cross_entropy_rows(sat, {0, 1}).item() < 1e-8);

    // uniform logits: ln K per element
    Tensor uni = Tensor::zeros(4, 5);
    CHECK(cross_entropy_rows(uni, {0, 1, 2, 3}).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // two classes, zero margin
    Tensor margin0 = Tensor::from(1, 2, {0.7, 0.7});
    CHECK(cross_entropy_rows(margin0, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS(cross_entropy_rows(uni, {0, 1, 2, 9}));

    Rng rng(9);
    Tensor logits = gaussian_param(3, 4, 1.0, rng, DType::F64);
    CHECK(gradcheck([&](const Tensor& t) { return cross_entropy_rows(t, {1, 3, 0}); }, logits, 1e-5) < 1e-4);
}

TEST_CASE("reconstruction loss and accuracy") {
    Graph tri(3);
    tri.node_type = {1, 1, 1};
    tri.set_edge(0, 1, 1);
    tri.set_edge(1, 2, 1);
    tri.set_edge(0, 2, 1);

    // perfect logits: loss vanishes, accuracies hit 1
    std::vector<double> nl(9, -20.0);
    for (int i = 0; i < 3; ++i) nl[static_cast<std::size_t>(i) * 3 + 1] = 20.0;
    Tensor node_logits = Tensor::from(3, 3, std::move(nl));
    std::vector<double> el(static_cast<std::size_t>(9) * 3, -20.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            el[(static_cast<std::size_t>(i) * 3 + j) * 3 + tri.etype(i, j)] = 20.0;
        }
    }
    Tensor edge_logits = Tensor::from(9, 3, std::move(el));
    CHECK(reconstruction_loss(node_logits, edge_logits, tri).item() < 1e-8);
    CHECK(node_accuracy(node_logits, tri) == 1.0);
    CHECK(edge_accuracy(edge_logits, tri) == 1.0);

    // uniform logits: ln K_n + ln K_e
    CHECK(reconstruction_loss(Tensor::zeros(3, 4), Tensor::zeros(9, 3), tri).item() ==
          doctest::Approx(std::log(4.0) + std::log(3.0)).epsilon(1e-12));

    CHECK_THROWS(reconstruction_loss(Tensor::zeros(3, 1), Tensor::zeros(9, 3), tri));
}

TEST_CASE("mse") {
    Tensor a = Tensor::from(1, 2, {3.0, 1.0});
    CHECK(mse(a, a).item() == 0.0);
    CHECK(mse(Tensor::scalar(3.0), Tensor::scalar(1.0)).item() == doctest::Approx(4.0));

    Rng rng(21);
    Tensor pred = gaussian_param(2, 2, 1.0, rng, DType::F64);
    Tensor truth = Tensor::from(2, 2, {0.5, -0.5, 1.0, 0.0});
    CHECK(gradcheck([&](const Tensor& t) { return mse(t, truth); }, pred, 1e-5) < 1e-4);
}
