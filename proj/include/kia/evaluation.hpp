#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kia/dynamics.hpp"
#include "kia/grid.hpp"
#include "kia/models.hpp"

namespace kia {

// Autoregressive latent rollout: one encode, L operator applications, one
// decode per step. x0 holds one initial observation per row (observation
// units). Returns L matrices, entry l-1 being the prediction for step l.
std::vector<Tensor> rollout(const KiaModel& model, const Tensor& x0, std::size_t horizon);

// Same predictions computed as decode(K^l encode(x0)) independently per l.
std::vector<Tensor> rollout_by_powers(const KiaModel& model, const Tensor& x0, std::size_t horizon);

// ||xhat - x||_2 / ||x||_2; nullopt when ||x|| == 0 (step excluded).
std::optional<double> relative_error(std::span<const double> predicted, std::span<const double> target);

// Mean absolute difference over all cells, degrees C.
double celsius_mae(std::span<const double> predicted, std::span<const double> target);

Tensor persistence_forecast(const Tensor& series, std::size_t t0, std::size_t lead);
// Throws ConfigError when the grid has no climatology.
Tensor climatology_forecast(const GridSeries& grid, std::size_t t0, std::size_t lead);

// Predicts, for every anchor row t0 (absolute index into the observation
// series), the observations at t0+1 .. t0+horizon. lead 0 is the
// forecaster's reconstruction of x_{t0}.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::string name() const = 0;
    // Result[l-1] has one row per anchor.
    virtual std::vector<Tensor> forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                         std::size_t horizon) const = 0;
    virtual Tensor reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const = 0;
};

class ModelForecaster final : public Forecaster {
public:
    explicit ModelForecaster(const KiaModel& model) : model_(&model) {}
    std::string name() const override { return to_string(model_->variant()); }
    std::vector<Tensor> forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                 std::size_t horizon) const override;
    Tensor reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const override;

private:
    const KiaModel* model_;
};

class PersistenceForecaster final : public Forecaster {
public:
    std::string name() const override { return "persistence"; }
    std::vector<Tensor> forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                 std::size_t horizon) const override;
    Tensor reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const override;
};

class ClimatologyForecaster final : public Forecaster {
public:
    explicit ClimatologyForecaster(Tensor climatology) : climatology_(std::move(climatology)) {}
    std::string name() const override { return "climatology"; }
    std::vector<Tensor> forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                 std::size_t horizon) const override;
    Tensor reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const override;

private:
    Tensor climatology_;
};

enum class ErrorMetric { Relative, CelsiusMae };

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;
};

struct ForecastReport {
    std::string model;
    ErrorMetric metric = ErrorMetric::Relative;
    std::vector<std::size_t> init_indices;
    // errors[i][s]: error of init i at step s+1; NaN marks an excluded step.
    std::vector<std::vector<double>> errors;
    std::size_t excluded_steps = 0;
    Aggregate all;
    Aggregate first100;
    Aggregate last100;
    nlohmann::json metadata = nlohmann::json::object();

    // Recomputes all/first100/last100 from the per-step series.
    void aggregate();
    nlohmann::json summary_json() const;
    std::string steps_csv() const;
};

// Evenly spaced anchors over [segment.begin, segment.end() - horizon).
std::vector<std::size_t> horizon_anchors(const Segment& segment, std::size_t n_inits, std::size_t horizon);

// Rollouts of `horizon` steps from n_inits test anchors, scored against
// `targets` (usually the observed series; the clean copy when requested).
ForecastReport evaluate_horizon(const Forecaster& forecaster, const Tensor& series, const Tensor& targets,
                                const Segment& test, std::size_t n_inits, std::size_t horizon, ErrorMetric metric);

struct KDayRow {
    std::size_t lead = 0;
    double mean_mae = 0.0;
    std::vector<std::size_t> target_days;
    std::vector<double> per_day;  // MAE per target day
    std::size_t skipped = 0;
};

// For every day d of the test segment and every lead K, forecast x_d from
// x_{d-K}; days with d-K < 0 are skipped and counted.
std::vector<KDayRow> evaluate_k_day(const Forecaster& forecaster, const Tensor& series, const Segment& test,
                                    std::span<const std::size_t> leads);

std::string k_day_csv(const std::string& model, const std::vector<KDayRow>& rows);

}  // namespace kia
