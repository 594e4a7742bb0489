#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kia/dynamics.hpp"
#include "kia/tensor.hpp"

namespace kia {

inline constexpr std::size_t kDaysPerYear = 365;

// Daily gridded temperatures in degrees Celsius. Day t has calendar day
// t % 365 (no leap years).
struct GridSeries {
    std::size_t height = 0;
    std::size_t width = 0;
    Tensor values;                      // T x (H*W), row-major cells
    std::string region = "synthetic";
    Split years{3, 1, 1};               // train / validation / test years
    std::uint64_t seed = 0;
    std::optional<Tensor> climatology;  // 365 x (H*W), training years only
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t days() const { return values.rows(); }
    std::size_t cells() const { return height * width; }
    Segment train_days() const { return {0, years.train * kDaysPerYear}; }
    Segment val_days() const { return {years.train * kDaysPerYear, years.val * kDaysPerYear}; }
    Segment test_days() const { return {(years.train + years.val) * kDaysPerYear, years.test * kDaysPerYear}; }
    void validate() const;
};

struct SyntheticSstParams {
    std::size_t height = 8;
    std::size_t width = 8;
    std::size_t years = 5;
    std::uint64_t seed = 0;
    double weather_std = 0.25;           // degC, i.i.d. daily noise
    double trend_per_year = 0.05;        // degC / year
    double interannual_amplitude = 0.15; // degC
    double interannual_period_years = 3.3;
    std::string region = "synthetic";

    void validate() const;
};

// base(i,j) + A(i,j) sin(2 pi day/365 + phi(i,j)) + drift(t) + N(0, weather_std^2),
// with base, A, phi smooth seeded fields; values clamped to [-2, 40] degC.
GridSeries generate_synthetic_sst(const SyntheticSstParams& params);

// Calendar-day mean over the first `train_years` years.
Tensor compute_climatology(const GridSeries& grid, std::size_t train_years);
GridSeries with_climatology(GridSeries grid);

// Rows are days, columns grid cells; dt = 1 day; splits follow the year split.
TrajectoryDataset grid_to_dataset(const GridSeries& grid);

inline constexpr int kGridVersion = 1;

std::string serialize_grid(const GridSeries& grid);
GridSeries deserialize_grid(const std::string& bytes);
void save_grid(const GridSeries& grid, const std::filesystem::path& path);
GridSeries load_grid(const std::filesystem::path& path);

// Reads the "format" field of a header+blob file.
std::string peek_format(const std::filesystem::path& path);

}  // namespace kia
