#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kia/tensor.hpp"

namespace kia {

struct PendulumParams {
    double theta0 = 0.8;   // rad
    double omega0 = 0.0;   // rad/s
    double g = 9.8;        // m/s^2
    double length = 1.0;   // m
    double t_start = 0.0;  // s
    double t_end = 400.0;  // s
    std::size_t n_points = 4000;
    std::size_t substeps = 100;  // RK4 steps per output interval

    void validate() const;
    double dt() const { return (t_end - t_start) / static_cast<double>(n_points); }
};

// Contiguous chronological split: train first, then validation, then test.
struct Split {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t total() const { return train + val + test; }
    std::size_t val_begin() const { return train; }
    std::size_t test_begin() const { return train + val; }

    static Split default_pendulum() { return {400, 1500, 2100}; }
};

// A contiguous run of rows [begin, begin + length).
struct Segment {
    std::size_t begin = 0;
    std::size_t length = 0;
    std::size_t end() const { return begin + length; }
};

struct SplitViews {
    Segment train;
    Segment val;
    Segment test;
};

struct TrajectoryDataset {
    Tensor observations;              // n_points x m
    double dt = 0.0;
    Split split;
    std::optional<Tensor> embedding;  // m x 2, orthonormal columns
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::optional<Tensor> clean;      // observations before noise
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t n_points() const { return observations.rows(); }
    std::size_t dim() const { return observations.cols(); }
    SplitViews views() const;
    void validate() const;
};

// Energy per unit mass-length^2: 0.5*omega^2 + (g/l)(1 - cos theta).
double pendulum_energy(double theta, double omega, const PendulumParams& p);

// RK4 on (theta' = omega, omega' = -(g/l) sin theta); states (theta, omega).
TrajectoryDataset simulate_pendulum(const PendulumParams& params);

// Seeded 64x2 (m x 2) Gram-Schmidt orthonormal embedding of 2-d states.
Tensor random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed);
TrajectoryDataset orthogonal_embed(const TrajectoryDataset& ds, std::size_t m, std::uint64_t seed);

TrajectoryDataset add_gaussian_noise(const TrajectoryDataset& ds, double std, std::uint64_t seed);

// Validates lengths against the dataset size and returns the three views.
SplitViews split_dataset(const TrajectoryDataset& ds, const Split& lengths);
TrajectoryDataset with_split(TrajectoryDataset ds, const Split& lengths);

// Keeps the `size` training points closest to the validation split and
// drops the rest, leaving validation and test data unchanged.
TrajectoryDataset truncate_train(const TrajectoryDataset& ds, std::size_t size);

inline constexpr int kDatasetVersion = 1;

std::string serialize_dataset(const TrajectoryDataset& ds);
TrajectoryDataset deserialize_dataset(const std::string& bytes);
void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

}  // namespace kia
