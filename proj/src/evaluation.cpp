#include "kia/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "kia/errors.hpp"

namespace kia {

namespace {

Tensor rows_at(const Tensor& series, std::span<const std::size_t> rows) {
    const std::size_t m = series.cols();
    Tensor out = Tensor::matrix(rows.size(), m);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= series.rows()) {
            throw ContractError("row " + std::to_string(rows[i]) + " outside series of " +
                                std::to_string(series.rows()) + " rows");
        }
        auto src = series.row_span(rows[i]);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

std::vector<Tensor> rollout(const KiaModel& model, const Tensor& x0, std::size_t horizon) {
    if (horizon < 1) throw ContractError("rollout horizon must be at least 1");
    std::vector<Tensor> out;
    out.reserve(horizon);
    Tensor z = model.encode(model.to_model_units(x0));
    for (std::size_t l = 1; l <= horizon; ++l) {
        z = model.koopman_power(z, 1);
        out.push_back(model.to_observation_units(model.decode(z)));
    }
    return out;
}

std::vector<Tensor> rollout_by_powers(const KiaModel& model, const Tensor& x0, std::size_t horizon) {
    if (horizon < 1) throw ContractError("rollout horizon must be at least 1");
    std::vector<Tensor> out;
    const Tensor z0 = model.encode(model.to_model_units(x0));
    for (std::size_t l = 1; l <= horizon; ++l) {
        out.push_back(model.to_observation_units(model.decode(model.koopman_power(z0, static_cast<long>(l)))));
    }
    return out;
}

std::optional<double> relative_error(std::span<const double> predicted, std::span<const double> target) {
    if (predicted.size() != target.size()) {
        throw DimensionError("relative_error: lengths " + std::to_string(predicted.size()) + " and " +
                             std::to_string(target.size()));
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = predicted[i] - target[i];
        num += d * d;
        den += target[i] * target[i];
    }
    if (den == 0.0) return std::nullopt;
    return std::sqrt(num) / std::sqrt(den);
}

double celsius_mae(std::span<const double> predicted, std::span<const double> target) {
    if (predicted.size() != target.size() || target.empty()) {
        throw ContractError("celsius_mae: grids of " + std::to_string(predicted.size()) + " and " +
                            std::to_string(target.size()) + " cells");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(predicted[i] - target[i]);
    return s / static_cast<double>(target.size());
}

Tensor persistence_forecast(const Tensor& series, std::size_t t0, std::size_t) {
    const std::size_t rows[] = {t0};
    return rows_at(series, rows);
}

Tensor climatology_forecast(const GridSeries& grid, std::size_t t0, std::size_t lead) {
    if (!grid.climatology) throw ConfigError("climatology forecast requires a climatology field");
    const std::size_t rows[] = {(t0 + lead) % kDaysPerYear};
    return rows_at(*grid.climatology, rows);
}

std::vector<Tensor> ModelForecaster::forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                              std::size_t horizon) const {
    return rollout(*model_, rows_at(series, anchors), horizon);
}

Tensor ModelForecaster::reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const {
    const Tensor x = model_->to_model_units(rows_at(series, anchors));
    return model_->to_observation_units(model_->decode(model_->encode(x)));
}

std::vector<Tensor> PersistenceForecaster::forecast(const Tensor& series, std::span<const std::size_t> anchors,
                                                    std::size_t horizon) const {
    return std::vector<Tensor>(horizon, rows_at(series, anchors));
}

Tensor PersistenceForecaster::reconstruct(const Tensor& series, std::span<const std::size_t> anchors) const {
    return rows_at(series, anchors);
}

std::vector<Tensor> ClimatologyForecaster::forecast(const Tensor&, std::span<const std::size_t> anchors,
                                                    std::size_t horizon) const {
    std::vector<Tensor> out;
    out.reserve(horizon);
    std::vector<std::size_t> days(anchors.size());
    for (std::size_t l = 1; l <= horizon; ++l) {
        for (std::size_t i = 0; i < anchors.size(); ++i) days[i] = (anchors[i] + l) % kDaysPerYear;
        out.push_back(rows_at(climatology_, days));
    }
    return out;
}

Tensor ClimatologyForecaster::reconstruct(const Tensor&, std::span<const std::size_t> anchors) const {
    std::vector<std::size_t> days(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) days[i] = anchors[i] % kDaysPerYear;
    return rows_at(climatology_, days);
}

void ForecastReport::aggregate() {
    auto window_stats = [this](auto select) {
        std::vector<double> per_init;
        for (const auto& series : errors) {
            const std::size_t n = series.size();
            const auto [from, to] = select(n);
            double s = 0.0;
            std::size_t c = 0;
            for (std::size_t i = from; i < to; ++i) {
                if (std::isnan(series[i])) continue;
                s += series[i];
                ++c;
            }
            per_init.push_back(c ? s / static_cast<double>(c) : std::numeric_limits<double>::quiet_NaN());
        }
        Aggregate a;
        if (per_init.empty()) return a;
        for (double v : per_init) a.mean += v;
        a.mean /= static_cast<double>(per_init.size());
        double ss = 0.0;
        for (double v : per_init) ss += (v - a.mean) * (v - a.mean);
        a.std = std::isfinite(a.mean) ? std::sqrt(ss / static_cast<double>(per_init.size())) : a.mean;
        return a;
    };
    all = window_stats([](std::size_t n) { return std::pair<std::size_t, std::size_t>{0, n}; });
    first100 = window_stats([](std::size_t n) { return std::pair<std::size_t, std::size_t>{0, std::min<std::size_t>(100, n)}; });
    last100 = window_stats([](std::size_t n) { return std::pair<std::size_t, std::size_t>{n - std::min<std::size_t>(100, n), n}; });
}

nlohmann::json ForecastReport::summary_json() const {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    };
    auto agg = [&](const Aggregate& a) { return nlohmann::json{{"mean", num(a.mean)}, {"std", num(a.std)}}; };
    return {{"model", model},
            {"metric", metric == ErrorMetric::Relative ? "relative" : "celsius_mae"},
            {"n_inits", errors.size()},
            {"horizon", errors.empty() ? 0 : errors.front().size()},
            {"init_indices", init_indices},
            {"excluded_steps", excluded_steps},
            {"all", agg(all)},
            {"first100", agg(first100)},
            {"last100", agg(last100)},
            {"metadata", metadata}};
}

std::string ForecastReport::steps_csv() const {
    std::string out = "init,anchor,step,error\n";
    for (std::size_t i = 0; i < errors.size(); ++i)
        for (std::size_t s = 0; s < errors[i].size(); ++s) {
            out += std::to_string(i) + "," + std::to_string(init_indices[i]) + "," + std::to_string(s + 1) + "," +
                   format_double(errors[i][s]) + "\n";
        }
    return out;
}

std::vector<std::size_t> horizon_anchors(const Segment& segment, std::size_t n_inits, std::size_t horizon) {
    if (n_inits == 0 || horizon == 0) throw ConfigError("n_inits and horizon must be positive");
    if (segment.length < horizon + n_inits) {
        throw ConfigError("test split has " + std::to_string(segment.length) + " points; horizon " +
                          std::to_string(horizon) + " with " + std::to_string(n_inits) + " initial conditions needs " +
                          std::to_string(horizon + n_inits));
    }
    const std::size_t count = segment.length - horizon;
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < n_inits; ++i) {
        anchors.push_back(segment.begin + (n_inits == 1 ? 0 : i * (count - 1) / (n_inits - 1)));
    }
    return anchors;
}

ForecastReport evaluate_horizon(const Forecaster& forecaster, const Tensor& series, const Tensor& targets,
                                const Segment& test, std::size_t n_inits, std::size_t horizon, ErrorMetric metric) {
    if (series.shape() != targets.shape()) {
        throw DimensionError("series " + shape_string(series.shape()) + " and targets " +
                             shape_string(targets.shape()) + " differ");
    }
    ForecastReport report;
    report.model = forecaster.name();
    report.metric = metric;
    report.init_indices = horizon_anchors(test, n_inits, horizon);
    const auto predictions = forecaster.forecast(series, report.init_indices, horizon);
    report.errors.assign(n_inits, std::vector<double>(horizon));
    for (std::size_t s = 0; s < horizon; ++s) {
        for (std::size_t i = 0; i < n_inits; ++i) {
            const auto pred = predictions[s].row_span(i);
            const auto truth = targets.row_span(report.init_indices[i] + s + 1);
            double e = 0.0;
            if (metric == ErrorMetric::Relative) {
                const auto rel = relative_error(pred, truth);
                if (!rel) {
                    ++report.excluded_steps;
                    report.errors[i][s] = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                e = *rel;
            } else {
                e = celsius_mae(pred, truth);
            }
            // A diverged rollout scores +inf rather than dropping out of the means.
            report.errors[i][s] = std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
        }
    }
    report.aggregate();
    return report;
}

std::vector<KDayRow> evaluate_k_day(const Forecaster& forecaster, const Tensor& series, const Segment& test,
                                    std::span<const std::size_t> leads) {
    if (test.end() > series.rows()) throw ConfigError("test segment extends past the series");
    std::vector<KDayRow> rows;
    for (std::size_t lead : leads) {
        KDayRow row;
        row.lead = lead;
        std::vector<std::size_t> anchors;
        for (std::size_t d = test.begin; d < test.end(); ++d) {
            if (d < lead) {
                ++row.skipped;
                continue;
            }
            row.target_days.push_back(d);
            anchors.push_back(d - lead);
        }
        if (anchors.empty()) {
            rows.push_back(std::move(row));
            continue;
        }
        const Tensor predicted = lead == 0 ? forecaster.reconstruct(series, anchors)
                                           : forecaster.forecast(series, anchors, lead).back();
        double sum = 0.0;
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            const double e = celsius_mae(predicted.row_span(i), series.row_span(row.target_days[i]));
            row.per_day.push_back(e);
            sum += e;
        }
        row.mean_mae = sum / static_cast<double>(anchors.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string k_day_csv(const std::string& model, const std::vector<KDayRow>& rows) {
    std::string out = "model,lead_days,mean_mae,n_days,skipped\n";
    for (const auto& r : rows) {
        out += model + "," + std::to_string(r.lead) + "," + format_double(r.mean_mae) + "," +
               std::to_string(r.per_day.size()) + "," + std::to_string(r.skipped) + "\n";
    }
    return out;
}

}  // namespace kia
