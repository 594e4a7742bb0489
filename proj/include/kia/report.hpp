#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kia/evaluation.hpp"

namespace kia {

// One evaluated run directory (summary.json + report.csv).
struct RunRecord {
    std::filesystem::path dir;
    std::string model;
    std::string setting;  // theta0 or region
    double noise_std = 0.0;
    std::string metric;
    Aggregate all;
    Aggregate first100;
    Aggregate last100;
    std::vector<double> mean_curve;  // mean error across inits per step
};

// nullopt with the reason in `why` when the directory lacks a usable evaluation.
std::optional<RunRecord> load_run(const std::filesystem::path& dir, std::string* why = nullptr);

// Per-step mean across inits from a steps CSV (init,anchor,step,error). NaN
// entries are skipped; a step with no usable entry is NaN.
std::vector<double> mean_curve_from_csv(const std::string& csv);

std::string comparison_csv(std::span<const RunRecord> runs);

struct Curve {
    std::string label;
    std::vector<double> values;  // value at step i+1
};

// Self-contained SVG line chart; non-finite points (and non-positive ones on
// a log axis) break the polyline.
std::string svg_chart(const std::string& title, std::span<const Curve> curves, bool log_scale,
                      const std::string& y_label);

struct ReportResult {
    std::vector<RunRecord> runs;
    std::vector<std::pair<std::filesystem::path, std::string>> skipped;
    std::vector<std::filesystem::path> charts;
};

// Writes comparison.csv and one chart per (setting, noise, metric) group to
// `out`. Throws ConfigError when no run is usable.
ReportResult build_report(std::span<const std::filesystem::path> dirs, const std::filesystem::path& out,
                          bool log_scale);

}  // namespace kia
