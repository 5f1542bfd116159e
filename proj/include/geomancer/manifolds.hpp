#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "geomancer/rng.hpp"

namespace geomancer::manifolds {

enum class SpaceKind { Hyperbolic, Spherical, Euclidean };

// A constant-curvature factor. Hyperbolic and spherical points live in the
// ambient model (dim + 1 coordinates); Euclidean points use dim coordinates.
struct CurvatureSpace {
    SpaceKind kind;
    double c;
    int dim;

    CurvatureSpace(SpaceKind k, double curv, int d) : kind(k), c(curv), dim(d) {
        if (d < 1) throw std::invalid_argument("manifold: dimension must be >= 1");
        const bool ok = (k == SpaceKind::Hyperbolic && curv < 0.0) ||
                        (k == SpaceKind::Spherical && curv > 0.0) ||
                        (k == SpaceKind::Euclidean && curv == 0.0);
        if (!ok) throw std::invalid_argument("manifold: curvature sign does not match kind");
    }

    int ambient_dim() const { return kind == SpaceKind::Euclidean ? dim : dim + 1; }
};

struct ProductManifold {
    std::vector<CurvatureSpace> components;

    explicit ProductManifold(std::vector<CurvatureSpace> cs) : components(std::move(cs)) {
        if (components.empty()) throw std::invalid_argument("product manifold: no components");
    }

    int total_dim() const {
        int d = 0;
        for (const auto& c : components) d += c.dim;
        return d;
    }
    int ambient_dim() const {
        int d = 0;
        for (const auto& c : components) d += c.ambient_dim();
        return d;
    }
};

namespace detail {
constexpr double kOnManifoldTol = 1e-6;
constexpr double kDomainClamp = 1e-12;
}  // namespace detail

template <class T>
T lorentz_inner(std::span<const T> x, std::span<const T> y) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument("lorentz_inner: dimension mismatch");
    }
    T acc = -x[0] * y[0];
    for (std::size_t j = 1; j < x.size(); ++j) acc += x[j] * y[j];
    return acc;
}

template <class T>
T dot(std::span<const T> x, std::span<const T> y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
    T acc = 0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += x[j] * y[j];
    return acc;
}

template <class T>
void check_on_hyperboloid(std::span<const T> x, double c) {
    const T want = static_cast<T>(1.0 / c);
    const T got = lorentz_inner(x, x);
    if (!(std::abs(got - want) <= detail::kOnManifoldTol * std::max<T>(1, std::abs(want)))) {
        throw std::domain_error("hyperbolic: point is off the manifold");
    }
}

template <class T>
void check_on_sphere(std::span<const T> x, double c) {
    const T want = static_cast<T>(1.0 / c);
    const T got = dot(x, x);
    if (!(std::abs(got - want) <= detail::kOnManifoldTol * std::max<T>(1, std::abs(want)))) {
        throw std::domain_error("spherical: point is off the manifold");
    }
}

template <class T>
T hyperbolic_distance(std::span<const T> x, std::span<const T> y, double c) {
    check_on_hyperboloid(x, c);
    check_on_hyperboloid(y, c);
    T arg = static_cast<T>(c) * lorentz_inner(x, y);
    if (arg < static_cast<T>(1.0 - 1e-6)) {
        throw std::domain_error("hyperbolic_distance: invalid inner product");
    }
    arg = std::max(arg, T(1));
    return std::acosh(arg) / static_cast<T>(std::sqrt(-c));
}

// exp map with the tangent norm taken as the Lorentz norm of v
template <class T>
std::vector<T> hyperbolic_exp(std::span<const T> xp, std::span<const T> v, double c) {
    if (xp.size() != v.size()) throw std::invalid_argument("hyperbolic_exp: dimension mismatch");
    T q = lorentz_inner(v, v);
    if (!std::isfinite(static_cast<double>(q))) throw std::domain_error("hyperbolic_exp: bad tangent");
    const T nv = std::sqrt(std::max(q, T(0)));
    std::vector<T> out(xp.begin(), xp.end());
    if (nv <= T(0)) return out;
    const T s = static_cast<T>(std::sqrt(-c)) * nv;
    const T ch = std::cosh(s), sh = std::sinh(s);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = ch * xp[j] + sh * v[j] / (static_cast<T>(std::sqrt(-c)) * nv);
    }
    return out;
}

// inverse of hyperbolic_exp; needed for the round-trip stability benchmark
template <class T>
std::vector<T> hyperbolic_log(std::span<const T> x, std::span<const T> y, double c) {
    const T alpha = static_cast<T>(c) * lorentz_inner(x, y);
    const T d = std::acosh(std::max(alpha, T(1))) / static_cast<T>(std::sqrt(-c));
    std::vector<T> u(x.size());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = y[j] - alpha * x[j];
    const T nu = std::sqrt(std::max(lorentz_inner<T>(u, u), T(0)));
    if (nu <= T(0)) return std::vector<T>(x.size(), T(0));
    for (auto& e : u) e *= d / nu;
    return u;
}

template <class T>
T sphere_distance(std::span<const T> x, std::span<const T> y, double c) {
    check_on_sphere(x, c);
    check_on_sphere(y, c);
    T arg = static_cast<T>(c) * dot(x, y);
    arg = std::min(std::max(arg, T(-1)), T(1));
    return std::acos(arg) / static_cast<T>(std::sqrt(c));
}

template <class T>
std::vector<T> sphere_exp(std::span<const T> xp, std::span<const T> v, double c) {
    if (xp.size() != v.size()) throw std::invalid_argument("sphere_exp: dimension mismatch");
    const T nv = std::sqrt(std::max(dot(v, v), T(0)));
    std::vector<T> out(xp.begin(), xp.end());
    if (nv <= T(0)) return out;
    const T rc = static_cast<T>(std::sqrt(c));
    const T s = rc * nv;
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = std::cos(s) * xp[j] + std::sin(s) * v[j] / (rc * nv);
    }
    return out;
}

template <class T>
std::vector<T> sphere_log(std::span<const T> x, std::span<const T> y, double c) {
    T alpha = static_cast<T>(c) * dot(x, y);
    alpha = std::min(std::max(alpha, T(-1)), T(1));
    const T d = std::acos(alpha) / static_cast<T>(std::sqrt(c));
    std::vector<T> u(x.size());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = y[j] - alpha * x[j];
    const T nu = std::sqrt(std::max(dot<T>(u, u), T(0)));
    if (nu <= T(0)) return std::vector<T>(x.size(), T(0));
    for (auto& e : u) e *= d / nu;
    return u;
}

template <class T>
T euclidean_distance(std::span<const T> x, std::span<const T> y) {
    if (x.size() != y.size()) throw std::invalid_argument("euclidean_distance: dimension mismatch");
    T acc = 0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - y[j]) * (x[j] - y[j]);
    return std::sqrt(acc);
}

template <class T>
T component_distance(const CurvatureSpace& s, std::span<const T> x, std::span<const T> y) {
    switch (s.kind) {
        case SpaceKind::Hyperbolic: return hyperbolic_distance(x, y, s.c);
        case SpaceKind::Spherical: return sphere_distance(x, y, s.c);
        case SpaceKind::Euclidean: return euclidean_distance(x, y);
    }
    throw std::logic_error("component_distance: bad kind");
}

// sqrt(sum of squared component distances) over the concatenated ambient layout
template <class T>
T product_distance(const ProductManifold& pm, std::span<const T> x, std::span<const T> y) {
    if (static_cast<int>(x.size()) != pm.ambient_dim() || x.size() != y.size()) {
        throw std::invalid_argument("product_distance: component mismatch");
    }
    T acc = 0;
    std::size_t off = 0;
    for (const auto& comp : pm.components) {
        const std::size_t w = static_cast<std::size_t>(comp.ambient_dim());
        const T d = component_distance(comp, x.subspan(off, w), y.subspan(off, w));
        acc += d * d;
        off += w;
    }
    return std::sqrt(acc);
}

// ---- sampling helpers (tests and benchmarks) --------------------------------

// base point (1/sqrt(-c), 0, ..., 0)
template <class T>
std::vector<T> hyperbolic_base(int dim, double c) {
    std::vector<T> x(static_cast<std::size_t>(dim) + 1, T(0));
    x[0] = static_cast<T>(1.0 / std::sqrt(-c));
    return x;
}

// tangent vector at x with the requested Lorentz norm
template <class T>
std::vector<T> random_hyperbolic_tangent(std::span<const T> x, double c, T norm, Rng& rng) {
    std::vector<T> g(x.size());
    for (auto& e : g) e = static_cast<T>(rng.gaussian());
    const T gx = lorentz_inner<T>(g, x);
    std::vector<T> v(x.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        v[j] = g[j] - static_cast<T>(c) * gx * x[j];
    }
    const T nv = std::sqrt(std::max(lorentz_inner<T>(v, v), T(1e-30)));
    for (auto& e : v) e *= norm / nv;
    return v;
}

struct RoundTripStats {
    int trials = 0;
    int nonfinite = 0;
    int failed = 0;  // finite but round-trip error above tolerance
    double failure_fraction() const {
        return trials == 0 ? 0.0 : static_cast<double>(nonfinite + failed) / trials;
    }
};

// exp followed by log at growing tangent norms; the classic instability probe.
template <class T>
RoundTripStats exp_log_roundtrip_stats(double c, int dim, double norm_lo, double norm_hi,
                                       int trials, std::uint64_t seed, double tol = 1e-3) {
    Rng rng(seed);
    RoundTripStats st;
    const auto base = hyperbolic_base<T>(dim, c);
    for (int t = 0; t < trials; ++t) {
        const T norm = static_cast<T>(rng.uniform(norm_lo, norm_hi));
        const auto v = random_hyperbolic_tangent<T>(base, c, norm, rng);
        ++st.trials;
        std::vector<T> y;
        try {
            y = hyperbolic_exp<T>(base, v, c);
        } catch (const std::exception&) {
            ++st.nonfinite;
            continue;
        }
        bool finite = true;
        for (T e : y) finite = finite && std::isfinite(static_cast<double>(e));
        if (!finite) {
            ++st.nonfinite;
            continue;
        }
        const auto back = hyperbolic_log<T>(base, y, c);
        double err = 0.0;
        bool back_finite = true;
        for (std::size_t j = 0; j < v.size(); ++j) {
            back_finite = back_finite && std::isfinite(static_cast<double>(back[j]));
            err = std::max(err, std::abs(static_cast<double>(back[j] - v[j])));
        }
        if (!back_finite) {
            ++st.nonfinite;
        } else if (err / std::max(1.0, static_cast<double>(norm)) > tol) {
            ++st.failed;
        }
    }
    return st;
}

}  // namespace geomancer::manifolds
