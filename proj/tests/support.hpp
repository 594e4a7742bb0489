#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "kia/models.hpp"
#include "kia/tensor.hpp"

namespace kia::test {

// Seeded value generators for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }

    Tensor normal_matrix(std::size_t rows, std::size_t cols, double scale = 1.0) {
        Tensor t = Tensor::matrix(rows, cols);
        for (double& v : t.values()) v = scale * normal();
        return t;
    }
    Tensor uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
        Tensor t = Tensor::matrix(rows, cols);
        for (double& v : t.values()) v = uniform(lo, hi);
        return t;
    }
    std::vector<double> normal_vector(std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = normal();
        return v;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// Single linear layer m -> d with identity weight (m == d) and zero bias.
inline void make_identity_stack(DenseStack& s) {
    for (auto& layer : s.layers) {
        const std::size_t n = layer.weight.rows();
        layer.weight = Tensor::identity(n);
        layer.bias = Tensor::matrix(1, n);
    }
}

inline ModelSpec linear_spec(Variant v, std::size_t dim) {
    ModelSpec s;
    s.variant = v;
    s.input_dim = dim;
    s.hidden = {};
    s.latent_dim = dim;
    s.coupling_depth = 1;
    return s;
}

// Tiny model with identity encoder/decoder; the operator is left to the caller.
inline KiaModel identity_autoencoder(Variant v, std::size_t dim) {
    KiaModel m = KiaModel::create(linear_spec(v, dim));
    make_identity_stack(m.encoder());
    make_identity_stack(m.decoder());
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace kia::test
