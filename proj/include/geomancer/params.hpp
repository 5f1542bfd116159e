#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geomancer/rng.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

// Named registry of learnable tensors. Registration order is the checkpoint
// order, so construction must be deterministic.
struct ParamStore {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor add(const std::string& name, Tensor t) {
        for (const auto& [n, _] : items) {
            if (n == name) throw std::invalid_argument("param store: duplicate name " + name);
        }
        items.emplace_back(name, t);
        return t;
    }

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : items) {
            if (n == name) return &t;
        }
        return nullptr;
    }

    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [_, t] : items) n += t.size();
        return n;
    }
};

inline Tensor xavier_param(int rows, int cols, Rng& rng, DType dt, double gain = 1.0) {
    const double bound = gain * std::sqrt(6.0 / (rows + cols));
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::param(rows, cols, std::move(v), dt);
}

inline Tensor gaussian_param(int rows, int cols, double stddev, Rng& rng, DType dt) {
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = rng.gaussian(0.0, stddev);
    return Tensor::param(rows, cols, std::move(v), dt);
}

inline Tensor zeros_param(int rows, int cols, DType dt) {
    return Tensor::param(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0), dt);
}

// Call before each backward pass: a parameter that does not participate in the
// recorded graph would otherwise keep its gradient from an earlier pass.
inline void zero_grads(ParamStore& store) {
    for (auto& [_, t] : store.items) t.zero_grad();
}

}  // namespace geomancer
