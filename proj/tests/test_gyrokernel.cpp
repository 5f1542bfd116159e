#include <cmath>
#include <span>
#include <vector>

#include "doctest.h"
#include "geomancer/gyrokernel.hpp"
#include "geomancer/params.hpp"
#include "geomancer/rng.hpp"

using namespace geomancer;

namespace {

double sq_norm(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

// Independent transcription of the hyperbolic Laplacian feature at c = -1.
double hyla_reference(std::span<const double> omega, double b, double lam, int n,
                      std::span<const double> z) {
    double den = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) den += (z[j] - omega[j]) * (z[j] - omega[j]);
    const double h = std::log((1.0 - sq_norm(z)) / den);
    return std::exp(0.5 * (n - 1) * h) * std::cos(lam * h + b);
}

std::vector<double> rotate2(std::span<const double> v, double angle) {
    return {std::cos(angle) * v[0] - std::sin(angle) * v[1],
            std::sin(angle) * v[0] + std::cos(angle) * v[1]};
}

// b = a + t*u with ball_distance(a, b) == target, via bisection along the ray
std::vector<double> point_at_distance(std::span<const double> a, std::span<const double> u,
                                      double target, double kappa) {
    auto at = [&](double t) {
        std::vector<double> p(a.begin(), a.end());
        for (std::size_t j = 0; j < p.size(); ++j) p[j] += t * u[j];
        return p;
    };
    double t_hi = 0.05;
    for (int it = 0; it < 60; ++it) {
        if (kappa < 0.0) {
            // stay inside the ball of radius 1/sqrt(|kappa|)
            auto p = at(t_hi);
            if (sq_norm(p) * (-kappa) >= 1.0 - 1e-7) {
                t_hi = (t_hi + t_hi / 2.0) / 2.0;  // back off
                break;
            }
        }
        if (ball_distance(a, at(t_hi), kappa) >= target) break;
        t_hi *= 1.5;
    }
    double lo = 0.0, hi = t_hi;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ball_distance(a, at(mid), kappa) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return at(0.5 * (lo + hi));
}

double kernel_estimate(const GyroFeatureBank& bank, std::span<const double> x,
                       std::span<const double> y) {
    const auto fx = fourier_map(bank, x);
    const auto fy = fourier_map(bank, y);
    double acc = 0.0;
    for (std::size_t j = 0; j < fx.size(); ++j) acc += fx[j] * fy[j];
    return acc;
}

std::vector<double> random_ball_point(double kappa, int dim, double rel_radius, Rng& rng) {
    const double r_ball = kappa < 0.0 ? 1.0 / std::sqrt(-kappa) : 1.0;
    auto dir = rng.unit_sphere(dim);
    const double r = rel_radius * r_ball * std::pow(rng.uniform(), 1.0 / dim);
    for (auto& v : dir) v *= r;
    return dir;
}

}  // namespace

TEST_CASE("signed distance") {
    std::vector<double> omega{1.0, 0.0};
    std::vector<double> origin{0.0, 0.0};
    CHECK(signed_distance(omega, origin, -1.0) == doctest::Approx(0.0));
    CHECK(signed_distance(omega, origin, 0.7) == doctest::Approx(0.0));

    std::vector<double> x{0.5, 0.0};
    CHECK(signed_distance(omega, x, -1.0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));

    // rotation invariance is exact: depends only on |x| and |x - omega|
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        auto w = rng.unit_sphere(2);
        auto p = random_ball_point(-1.0, 2, 0.9, rng);
        const double angle = rng.uniform(0.0, 6.28);
        auto wr = rotate2(w, angle);
        auto pr = rotate2(p, angle);
        CHECK(std::abs(signed_distance(w, p, -1.0) - signed_distance(wr, pr, -1.0)) < 1e-12);
    }

    // domain errors
    std::vector<double> outside{2.0, 0.0};
    CHECK_THROWS(signed_distance(omega, outside, -1.0));
    std::vector<double> near_omega{1.0 - 1e-10, 0.0};
    CHECK_THROWS(signed_distance(omega, near_omega, -1.0));
}

TEST_CASE("eigenfunction") {
    std::vector<double> omega{0.0, 1.0};
    std::vector<double> origin{0.0, 0.0};
    CHECK(eigenfunction(omega, 0.9, 2.3, -1.0, 2, origin) == doctest::Approx(std::cos(0.9)).epsilon(1e-14));
    const double half_pi = 0.5 * std::acos(-1.0);
    CHECK(eigenfunction(omega, half_pi, 5.0, -1.0, 2, origin) == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<double> w{1.0, 0.0}, x{0.5, 0.0};
    const double expected = std::sqrt(3.0) * std::cos(std::log(3.0));
    CHECK(eigenfunction(w, 0.0, 1.0, -1.0, 2, x) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(expected - 0.789) < 2e-3);

    // |gF| <= A
    Rng rng(8);
    for (int t = 0; t < 200; ++t) {
        auto om = rng.unit_sphere(3);
        auto p = random_ball_point(-1.0, 3, 0.95, rng);
        const double s = signed_distance(om, p, -1.0);
        const double a = std::exp(0.5 * 2 * s);
        CHECK(std::abs(eigenfunction(om, rng.uniform(0.0, 6.28), rng.gaussian(), -1.0, 3, p)) <= a + 1e-12);
    }
}

TEST_CASE("fourier map scaling and reproducibility") {
    auto bank1 = GyroFeatureBank::sample(-1.0, 2, 1, 1.0, 404);
    std::vector<double> x{0.3, -0.1};
    auto f1 = fourier_map(bank1, x);
    REQUIRE(f1.size() == 1);
    CHECK(f1[0] == doctest::Approx(eigenfunction(bank1.omega[0], bank1.bias[0], bank1.lambda[0],
                                                 -1.0, 2, x)).epsilon(1e-14));

    auto bank = GyroFeatureBank::sample(-1.0, 2, 16, 1.0, 77);
    std::vector<double> origin{0.0, 0.0};
    auto f0 = fourier_map(bank, origin);
    for (int j = 0; j < 16; ++j) {
        CHECK(f0[j] == doctest::Approx(std::cos(bank.bias[j]) / 4.0).epsilon(1e-14));
    }

    auto again = GyroFeatureBank::sample(-1.0, 2, 16, 1.0, 77);
    for (int j = 0; j < 16; ++j) {
        CHECK(again.lambda[j] == bank.lambda[j]);
        CHECK(again.bias[j] == bank.bias[j]);
        CHECK(again.omega[j] == bank.omega[j]);
        CHECK(std::abs(sq_norm(again.omega[j]) - 1.0) < 1e-12);
        CHECK(again.bias[j] >= 0.0);
        CHECK(again.bias[j] < 6.2832);
    }
}

TEST_CASE("hyla specialization at kappa = -1") {
    Rng rng(13);
    auto bank = GyroFeatureBank::sample(-1.0, 4, 8, 1.0, 2024);
    for (int t = 0; t < 1000; ++t) {
        auto p = random_ball_point(-1.0, 4, 0.95, rng);
        const int j = static_cast<int>(rng.uniform_int(8));
        const double ours = eigenfunction(bank.omega[j], bank.bias[j], bank.lambda[j], -1.0, 4, p);
        const double ref = hyla_reference(bank.omega[j], bank.bias[j], bank.lambda[j], 4, p);
        CHECK(std::abs(ours - ref) < 1e-12);
    }
}

TEST_CASE("rotation equivariance of the eigenfunction") {
    Rng rng(29);
    for (int t = 0; t < 500; ++t) {
        auto w = rng.unit_sphere(2);
        auto p = random_ball_point(-0.8, 2, 0.9, rng);
        const double b = rng.uniform(0.0, 6.28), lam = rng.gaussian();
        const double angle = rng.uniform(0.0, 6.28);
        const double v0 = eigenfunction(w, b, lam, -0.8, 2, p);
        const double v1 = eigenfunction(rotate2(w, angle), b, lam, -0.8, 2, rotate2(p, angle));
        CHECK(std::abs(v0 - v1) < 1e-12);
    }
}

TEST_CASE("kernel invariance: equal geodesic distance gives equal inner products") {
    // Monte Carlo with m = 4096; estimates for equal-distance pairs must agree
    // within 5/sqrt(m). The invariance guarantee comes from the boundary-omega
    // construction (kappa = -1) and from flat random Fourier features
    // (kappa = 0); positive curvature keeps the feature usable but the sampled
    // kernel there is position-dependent, so only the two-bank consistency is
    // checked for it.
    const int m = 4096;
    const double tol = 5.0 / std::sqrt(static_cast<double>(m));
    Rng rng(71);

    for (double kappa : {-1.0, 0.0}) {
        auto bank = GyroFeatureBank::sample(kappa, 3, m, 1.0, derive_seed(1234, kappa < 0 ? 0 : 2));
        auto bank2 = GyroFeatureBank::sample(kappa, 3, m, 1.0, derive_seed(888, 7));
        for (int rep = 0; rep < 3; ++rep) {
            const double r = 0.25 + 0.35 * rng.uniform();
            auto a1 = random_ball_point(kappa, 3, 0.4, rng);
            auto u1 = rng.unit_sphere(3);
            auto b1 = point_at_distance(a1, u1, r, kappa);
            auto a2 = random_ball_point(kappa, 3, 0.4, rng);
            auto u2 = rng.unit_sphere(3);
            auto b2 = point_at_distance(a2, u2, r, kappa);
            REQUIRE(std::abs(ball_distance(a1, b1, kappa) - r) < 1e-9);
            REQUIRE(std::abs(ball_distance(a2, b2, kappa) - r) < 1e-9);

            const double k11 = kernel_estimate(bank, a1, b1);
            const double k22 = kernel_estimate(bank, a2, b2);
            CHECK(std::abs(k11 - k22) < tol);
            // a fresh bank estimates the same kernel
            CHECK(std::abs(k11 - kernel_estimate(bank2, a1, b1)) < tol);
        }
    }

    // positive curvature: two banks must agree on the same pair
    auto bank_s = GyroFeatureBank::sample(0.6, 3, m, 1.0, 31);
    auto bank_s2 = GyroFeatureBank::sample(0.6, 3, m, 1.0, 32);
    auto a = random_ball_point(0.6, 3, 0.4, rng);
    auto b = point_at_distance(a, rng.unit_sphere(3), 0.4, 0.6);
    CHECK(std::abs(kernel_estimate(bank_s, a, b) - kernel_estimate(bank_s2, a, b)) < tol);
}

TEST_CASE("kernel invariance on a product manifold") {
    // Pairs with equal per-component geodesic distances (hence equal product
    // distance); concatenated-feature inner products add per component.
    const int m = 4096;
    const double tol = 5.0 / std::sqrt(static_cast<double>(m));
    Rng rng(404);
    auto bank_h = GyroFeatureBank::sample(-1.0, 3, m, 1.0, 61);
    auto bank_e = GyroFeatureBank::sample(0.0, 3, m, 1.0, 62);

    for (int rep = 0; rep < 3; ++rep) {
        const double rh = 0.3 + 0.3 * rng.uniform();
        const double re = 0.3 + 0.3 * rng.uniform();
        auto ah1 = random_ball_point(-1.0, 3, 0.4, rng);
        auto bh1 = point_at_distance(ah1, rng.unit_sphere(3), rh, -1.0);
        auto ah2 = random_ball_point(-1.0, 3, 0.4, rng);
        auto bh2 = point_at_distance(ah2, rng.unit_sphere(3), rh, -1.0);
        auto ae1 = random_ball_point(0.0, 3, 0.4, rng);
        auto be1 = point_at_distance(ae1, rng.unit_sphere(3), re, 0.0);
        auto ae2 = random_ball_point(0.0, 3, 0.4, rng);
        auto be2 = point_at_distance(ae2, rng.unit_sphere(3), re, 0.0);

        const double k1 = kernel_estimate(bank_h, ah1, bh1) + kernel_estimate(bank_e, ae1, be1);
        const double k2 = kernel_estimate(bank_h, ah2, bh2) + kernel_estimate(bank_e, ae2, be2);
        CHECK(std::abs(k1 - k2) < 2.0 * tol);
    }
}

TEST_CASE("features stay finite on a boundary sweep") {
    Rng rng(55);
    const double kappa = -1.0;
    auto bank = GyroFeatureBank::sample(kappa, 2, 32, 1.0, 99);
    int nonfinite = 0;
    for (int step = 0; step < 200; ++step) {
        const double frac = 1.0 - std::pow(10.0, -6.0 * (step + 1) / 200.0);
        auto dir = rng.unit_sphere(2);
        std::vector<double> x{dir[0] * std::sqrt(frac), dir[1] * std::sqrt(frac)};
        for (double v : fourier_map(bank, x)) {
            if (!std::isfinite(v)) ++nonfinite;
        }
    }
    CHECK(nonfinite == 0);
}

TEST_CASE("basis projection") {
    Rng rng(314);
    ParamStore store;
    std::vector<GyroComponentSpec> specs{{-1.0, 6}, {0.0, 4}, {1.0, 5}};
    auto basis = ProductManifoldBasis::create(specs, 3, 2, 1.0, 555, rng, DType::F64, store);
    CHECK(basis.total_features() == 15);
    CHECK(basis.feature_widths() == std::vector<int>{6, 4, 5});

    Tensor vbar = basis.project();
    CHECK(vbar.rows() == 3);
    CHECK(vbar.cols() == 15);

    // single component with a basis point at the origin: row is cos(b)/sqrt(m)
    ParamStore store1;
    Rng rng1(1);
    auto single = ProductManifoldBasis::create({{-1.0, 6}}, 1, 2, 1.0, 42, rng1, DType::F64, store1);
    auto vals = single.components[0].points.values_mut();
    vals[0] = 0.0;
    vals[1] = 0.0;
    Tensor row = single.project();
    for (int j = 0; j < 6; ++j) {
        CHECK(row(0, j) ==
              doctest::Approx(std::cos(single.components[0].bank.bias[j]) / std::sqrt(6.0)).epsilon(1e-12));
    }

    // perturbing one basis point changes only its own row
    Tensor before = basis.project();
    auto pv = basis.components[0].points.values_mut();
    pv[2 * 1 + 0] += 0.05;  // row 1 of component 0
    Tensor after = basis.project();
    for (int j = 0; j < 15; ++j) {
        CHECK(before(0, j) == after(0, j));
        CHECK(before(2, j) == after(2, j));
    }
    bool changed = false;
    for (int j = 0; j < 6; ++j) changed = changed || before(1, j) != after(1, j);
    CHECK(changed);
}

TEST_CASE("basis gradients pass gradcheck") {
    Rng rng(2718);
    ParamStore store;
    auto basis = ProductManifoldBasis::create({{-1.0, 5}, {0.0, 3}, {1.0, 4}}, 2, 2, 1.0, 808, rng,
                                              DType::F64, store);
    Tensor weight = Tensor::from(2, 12, [] {
        Rng r(99);
        std::vector<double> v(24);
        for (auto& x : v) x = r.gaussian();
        return v;
    }());

    for (auto& comp : basis.components) {
        CHECK(gradcheck(
                  [&](const Tensor&) { return sum_all(mul(basis.project(), weight)); },
                  comp.points, 1e-5) < 1e-4);
        if (comp.kappa_sign != 0.0) {
            CHECK(gradcheck(
                      [&](const Tensor&) { return sum_all(mul(basis.project(), weight)); },
                      comp.theta, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("geometrize") {
    Rng rng(6);
    ParamStore store;
    auto basis = ProductManifoldBasis::create({{-1.0, 4}, {1.0, 4}}, 3, 2, 1.0, 11, rng, DType::F64, store);
    Tensor vbar = basis.project();

    Tensor zero = Tensor::zeros(2, 3);
    Tensor out = geometrize(zero, vbar);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 8; ++j) CHECK(out(i, j) == 0.0);

    Tensor eye = Tensor::from(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor rows = geometrize(eye, vbar);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 8; ++j) CHECK(rows(i, j) == doctest::Approx(vbar(i, j)).epsilon(1e-14));

    Tensor onehot = Tensor::from(1, 3, {0, 1, 0});
    Tensor r1 = geometrize(onehot, vbar);
    for (int j = 0; j < 8; ++j) CHECK(r1(0, j) == doctest::Approx(vbar(1, j)).epsilon(1e-14));

    CHECK_THROWS(geometrize(Tensor::zeros(2, 4), vbar));
}

TEST_CASE("clamp keeps negative-curvature points inside the ball") {
    Rng rng(12);
    ParamStore store;
    auto basis = ProductManifoldBasis::create({{-1.0, 4}}, 2, 2, 1.0, 5, rng, DType::F64, store);
    auto vals = basis.components[0].points.values_mut();
    vals[0] = 5.0;
    vals[1] = 0.0;
    basis.clamp_points();
    const double limit = (1.0 - 1e-4) / std::sqrt(-basis.components[0].kappa());
    double norm = std::hypot(basis.components[0].points(0, 0), basis.components[0].points(0, 1));
    CHECK(norm <= limit + 1e-12);
    Tensor ok = basis.project();  // no throw after clamping
    CHECK(ok.rows() == 2);
}
