#include "geomancer/gyrokernel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "geomancer/manifolds.hpp"

namespace geomancer {

namespace {
constexpr double kDenomGuard = 1e-8;          // on ||x - omega||
constexpr double kDenomGuardSq = 1e-16;       // on ||x - omega||^2
constexpr double kNumGuard = 1e-12;           // on 1 + kappa ||x||^2
constexpr double kBallMargin = 1e-4;          // radial clamp target (1 - margin) / sqrt(|kappa|)

double sq_norm(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}
}  // namespace

GyroFeatureBank GyroFeatureBank::sample(double kappa, int ball_dim, int feature_count,
                                        double freq_scale, std::uint64_t seed) {
    if (ball_dim < 1 || feature_count < 1) {
        throw std::invalid_argument("feature bank: bad dimensions");
    }
    GyroFeatureBank bank;
    bank.kappa = kappa;
    bank.ball_dim = ball_dim;
    bank.feature_count = feature_count;
    bank.freq_scale = freq_scale;
    bank.seed = seed;
    Rng rng(seed);
    bank.omega.reserve(feature_count);
    bank.lambda.reserve(feature_count);
    bank.bias.reserve(feature_count);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (int j = 0; j < feature_count; ++j) {
        bank.omega.push_back(rng.unit_sphere(ball_dim));
        bank.lambda.push_back(rng.gaussian(0.0, freq_scale));
        bank.bias.push_back(rng.uniform(0.0, two_pi));
    }
    return bank;
}

double signed_distance(std::span<const double> omega, std::span<const double> x, double kappa) {
    if (omega.size() != x.size()) throw std::invalid_argument("signed_distance: dimension mismatch");
    double diff = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) diff += (x[j] - omega[j]) * (x[j] - omega[j]);
    if (diff < kDenomGuardSq) throw std::domain_error("signed_distance: x too close to omega");
    const double num = 1.0 + kappa * sq_norm(x);
    if (num <= 0.0) throw std::domain_error("signed_distance: point outside the ball");
    return std::log(num / diff);
}

double eigenfunction(std::span<const double> omega, double bias, double lambda, double kappa,
                     int ball_dim, std::span<const double> x) {
    if (kappa == 0.0) {
        double ip = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) ip += omega[j] * x[j];
        return std::cos(lambda * ip + bias);
    }
    const double s = signed_distance(omega, x, kappa);
    const double amp = std::exp(0.5 * (ball_dim - 1) * s);
    return amp * std::cos(lambda * s + bias);
}

std::vector<double> fourier_map(const GyroFeatureBank& bank, std::span<const double> x) {
    if (static_cast<int>(x.size()) != bank.ball_dim) {
        throw std::invalid_argument("fourier_map: point dimension mismatch");
    }
    std::vector<double> out(static_cast<std::size_t>(bank.feature_count));
    const double scale = 1.0 / std::sqrt(static_cast<double>(bank.feature_count));
    for (int j = 0; j < bank.feature_count; ++j) {
        out[j] = scale * eigenfunction(bank.omega[j], bank.bias[j], bank.lambda[j], bank.kappa,
                                       bank.ball_dim, x);
    }
    return out;
}

std::vector<double> ball_to_hyperboloid(std::span<const double> x, double kappa) {
    const double a = -kappa;  // |kappa|
    const double u = a * sq_norm(x);
    if (u >= 1.0) throw std::domain_error("ball_to_hyperboloid: point outside the ball");
    std::vector<double> out(x.size() + 1);
    out[0] = (1.0 + u) / ((1.0 - u) * std::sqrt(a));
    for (std::size_t j = 0; j < x.size(); ++j) out[j + 1] = 2.0 * x[j] / (1.0 - u);
    return out;
}

std::vector<double> ball_to_sphere(std::span<const double> x, double kappa) {
    const double u = kappa * sq_norm(x);
    std::vector<double> out(x.size() + 1);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = 2.0 * x[j] / (1.0 + u);
    out[x.size()] = (1.0 - u) / ((1.0 + u) * std::sqrt(kappa));
    return out;
}

double ball_distance(std::span<const double> x, std::span<const double> y, double kappa) {
    if (kappa < 0.0) {
        const auto hx = ball_to_hyperboloid(x, kappa);
        const auto hy = ball_to_hyperboloid(y, kappa);
        return manifolds::hyperbolic_distance<double>(hx, hy, kappa);
    }
    if (kappa > 0.0) {
        const auto sx = ball_to_sphere(x, kappa);
        const auto sy = ball_to_sphere(y, kappa);
        return manifolds::sphere_distance<double>(sx, sy, kappa);
    }
    return manifolds::euclidean_distance<double>(x, y);
}

double BasisComponent::kappa() const {
    if (kappa_sign == 0.0) return 0.0;
    return kappa_sign * std::exp(theta.item());
}

ProductManifoldBasis ProductManifoldBasis::create(const std::vector<GyroComponentSpec>& specs,
                                                  int latent_dim, int ball_dim, double freq_scale,
                                                  std::uint64_t seed, Rng& init_rng, DType dt,
                                                  ParamStore& store, const std::string& prefix) {
    if (specs.empty()) throw std::invalid_argument("basis: no components");
    ProductManifoldBasis basis;
    basis.latent_dim = latent_dim;
    basis.ball_dim = ball_dim;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        BasisComponent comp;
        comp.kappa_sign = specs[i].kappa_sign;
        const double kappa0 = specs[i].kappa_sign;  // initial |kappa| = 1 for curved components
        comp.bank = GyroFeatureBank::sample(kappa0, ball_dim, specs[i].feature_count, freq_scale,
                                            derive_seed(seed, 0x6b00 + i));
        // points start well inside the unit ball (|kappa| = 1 at init)
        std::vector<double> pts(static_cast<std::size_t>(latent_dim) * ball_dim);
        for (int r = 0; r < latent_dim; ++r) {
            auto dir = init_rng.unit_sphere(ball_dim);
            const double radius =
                0.5 * std::pow(init_rng.uniform(), 1.0 / ball_dim);
            for (int c = 0; c < ball_dim; ++c) {
                pts[static_cast<std::size_t>(r) * ball_dim + c] = radius * dir[c];
            }
        }
        const std::string base = prefix + ".c" + std::to_string(i);
        comp.points = store.add(base + ".points", Tensor::param(latent_dim, ball_dim, std::move(pts), dt));
        if (comp.kappa_sign != 0.0) {
            comp.theta = store.add(base + ".theta", zeros_param(1, 1, dt));
        }
        basis.components.push_back(std::move(comp));
    }
    return basis;
}

int ProductManifoldBasis::total_features() const {
    int m = 0;
    for (const auto& c : components) m += c.bank.feature_count;
    return m;
}

std::vector<int> ProductManifoldBasis::feature_widths() const {
    std::vector<int> w;
    w.reserve(components.size());
    for (const auto& c : components) w.push_back(c.bank.feature_count);
    return w;
}

Tensor ProductManifoldBasis::project() const {
    std::vector<Tensor> blocks;
    blocks.reserve(components.size());
    for (const auto& comp : components) {
        const int m = comp.bank.feature_count;
        const int n = comp.bank.ball_dim;
        const DType dt = comp.points.dtype();

        std::vector<double> om(static_cast<std::size_t>(n) * m);
        std::vector<double> lam(static_cast<std::size_t>(m));
        std::vector<double> bia(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            for (int r = 0; r < n; ++r) om[static_cast<std::size_t>(r) * m + j] = comp.bank.omega[j][r];
            lam[j] = comp.bank.lambda[j];
            bia[j] = comp.bank.bias[j];
        }
        Tensor omega = Tensor::from(n, m, std::move(om), dt);
        Tensor lambda_row = Tensor::from(1, m, std::move(lam), dt);
        Tensor bias_row = Tensor::from(1, m, std::move(bia), dt);

        Tensor xw = matmul(comp.points, omega);               // [d x m] inner products
        const double scale = 1.0 / std::sqrt(static_cast<double>(m));

        if (comp.kappa_sign == 0.0) {
            Tensor phase = mul(xw, lambda_row) + bias_row;
            blocks.push_back(cos(phase) * scale);
            continue;
        }

        Tensor kappa = exp(comp.theta) * comp.kappa_sign;     // [1 x 1]
        Tensor x_norm2 = sum_axis(mul(comp.points, comp.points), 1);  // [d x 1]
        Tensor dist2 = clamp_min(x_norm2 + 1.0 - xw * 2.0, kDenomGuardSq);
        Tensor numer = clamp_min(mul(x_norm2, kappa) + 1.0, kNumGuard);
        Tensor sdist = log(numer) - log(dist2);               // [d x m] via broadcast
        Tensor amp = exp(sdist * (0.5 * (n - 1)));
        Tensor phase = mul(sdist, lambda_row) + bias_row;
        blocks.push_back(mul(amp, cos(phase)) * scale);
    }
    return blocks.size() == 1 ? blocks[0] : concat(blocks, 1);
}

void ProductManifoldBasis::clamp_points() {
    static int warned = 0;
    for (auto& comp : components) {
        if (comp.kappa_sign >= 0.0) continue;  // only kappa < 0 has a ball constraint
        const double limit = (1.0 - kBallMargin) / std::sqrt(-comp.kappa());
        auto vals = comp.points.values_mut();
        const int n = comp.bank.ball_dim;
        for (int r = 0; r < comp.points.rows(); ++r) {
            double* row = vals.data() + static_cast<std::size_t>(r) * n;
            double norm = 0.0;
            for (int c = 0; c < n; ++c) norm += row[c] * row[c];
            norm = std::sqrt(norm);
            if (norm > limit) {
                if (warned < 3) {
                    std::fprintf(stderr, "gyrokernel: rescaling basis point back into the ball\n");
                    ++warned;
                }
                for (int c = 0; c < n; ++c) row[c] *= limit / norm;
            }
        }
        comp.points.round_to_dtype();
    }
}

Tensor geometrize(const Tensor& z, const Tensor& v_bar) { return matmul(z, v_bar); }

}  // namespace geomancer
