#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geomancer/params.hpp"
#include "geomancer/rng.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

// Sampled Fourier feature bank on the gyrovector ball G_kappa^n. omega lives on
// the unit sphere, lambda is Gaussian with scale s, bias is uniform in [0, 2pi).
// The bank is immutable once sampled and reproducible from its seed.
struct GyroFeatureBank {
    double kappa = -1.0;
    int ball_dim = 2;
    int feature_count = 0;
    double freq_scale = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> omega;
    std::vector<double> lambda;
    std::vector<double> bias;

    static GyroFeatureBank sample(double kappa, int ball_dim, int feature_count,
                                  double freq_scale, std::uint64_t seed);
};

// log((1 + kappa ||x||^2) / ||x - omega||^2); the Busemann-type argument of the
// ball eigenfunction. Guards: ||x - omega|| >= 1e-8, numerator > 0.
double signed_distance(std::span<const double> omega, std::span<const double> x, double kappa);

// A * cos(lambda * <omega, x>_kappa + b) with A = exp((n-1)/2 * <omega, x>_kappa).
// kappa == 0 degenerates to the flat random Fourier feature cos(lambda <omega, x> + b).
double eigenfunction(std::span<const double> omega, double bias, double lambda, double kappa,
                     int ball_dim, std::span<const double> x);

// 1/sqrt(m) * [gF_1(x), ..., gF_m(x)]
std::vector<double> fourier_map(const GyroFeatureBank& bank, std::span<const double> x);

// Geodesic distance inside the ball model, by lifting to the ambient model of
// matching curvature (kappa == 0 is plain Euclidean distance).
double ball_distance(std::span<const double> x, std::span<const double> y, double kappa);
std::vector<double> ball_to_hyperboloid(std::span<const double> x, double kappa);
std::vector<double> ball_to_sphere(std::span<const double> x, double kappa);

// One learnable component of the product-manifold basis: a feature bank, one
// ball point per latent dimension, and (for curved components) a curvature
// magnitude parameter kappa = sign * exp(theta).
struct BasisComponent {
    GyroFeatureBank bank;
    double kappa_sign = -1.0;  // -1, 0, +1
    Tensor points;             // [d_latent x ball_dim]
    Tensor theta;              // [1 x 1]; undefined for kappa_sign == 0

    double kappa() const;
};

struct GyroComponentSpec {
    double kappa_sign = -1.0;
    int feature_count = 64;
};

struct ProductManifoldBasis {
    int latent_dim = 0;
    int ball_dim = 2;
    std::vector<BasisComponent> components;

    static ProductManifoldBasis create(const std::vector<GyroComponentSpec>& specs, int latent_dim,
                                       int ball_dim, double freq_scale, std::uint64_t seed,
                                       Rng& init_rng, DType dt, ParamStore& store,
                                       const std::string& prefix = "gyro");

    int total_features() const;
    std::vector<int> feature_widths() const;

    // V-bar: row j is the concatenation over components of phi_gF applied to
    // the j-th basis point. Differentiable w.r.t. points and curvatures.
    Tensor project() const;

    // Radially rescale points back into the ball after a parameter update.
    void clamp_points();
};

// Z-bar = Z * V-bar
Tensor geometrize(const Tensor& z, const Tensor& v_bar);

}  // namespace geomancer
