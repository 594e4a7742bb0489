#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kia/dynamics.hpp"
#include "kia/evaluation.hpp"
#include "kia/grid.hpp"
#include "kia/models.hpp"
#include "kia/training.hpp"

namespace kia {

enum class ExperimentKind { Pendulum, Climate };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

// Sub-seeds fan out from the master seed by fixed offsets so that changing
// one stage leaves the others untouched.
struct SeedPlan {
    std::uint64_t master = 0;

    std::uint64_t embedding() const { return master + 101; }
    std::uint64_t noise() const { return master + 202; }
    std::uint64_t init() const { return master + 303; }
    std::uint64_t shuffle() const { return master + 404; }
    std::uint64_t grid() const { return master + 505; }

    nlohmann::json to_json() const;
};

struct EvalConfig {
    std::size_t horizon = 2000;
    std::size_t inits = 30;
    bool clean_targets = false;
    std::vector<std::size_t> k_day{1, 7, 14, 21, 30};
};

// Everything needed to rerun an experiment. The JSON form is the config file
// schema; every field is echoed into each run's metadata.json.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Pendulum;
    std::string model = "KIA";  // KIA, KAE, CKAE, persistence, climatology

    PendulumParams pendulum;
    Split split = Split::default_pendulum();
    std::size_t embed_dim = 64;
    double noise_std = 0.0;
    std::optional<std::size_t> train_size;  // truncates the training split

    SyntheticSstParams grid;

    std::vector<std::size_t> hidden{128, 64};
    std::size_t latent_dim = 8;
    std::size_t coupling_depth = 4;
    bool coupling_bias = false;
    KoopmanInit koopman_init = KoopmanInit::Rotation;
    // Per-column mean / global std fitted on the training rows (climate default).
    bool normalize = false;

    TrainConfig train;
    LossWeights weights;
    // False until lambda_bwd is set explicitly; KAE then trains with 0.
    bool bwd_weight_set = false;

    EvalConfig eval;
    std::vector<std::size_t> ablation_sizes{200, 300, 400};

    std::uint64_t seed = 0;
    std::string out = "runs/default";

    // Pendulum: k = 16, horizon 2000. Climate: k = 4, horizon 180.
    static ExperimentConfig defaults(ExperimentKind kind);
    // Starts from defaults(kind) and overlays the given keys; unknown keys
    // and ill-typed values throw ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    void set_model(std::string_view name);
    void set_bwd_weight(double value);

    bool learned() const;
    Variant variant() const;  // ConfigError for baselines
    SeedPlan seeds() const { return {seed}; }
    ModelSpec model_spec(std::size_t input_dim) const;
    LossWeights effective_weights() const;
    // Throws ConfigError naming the offending field.
    void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// Simulate, embed, add noise and truncate as configured.
TrajectoryDataset make_pendulum_dataset(const ExperimentConfig& cfg);
// Synthetic grid with climatology from the training years.
GridSeries make_grid(const ExperimentConfig& cfg);

// Dataset view of whatever the config describes (grid rows for climate).
struct ExperimentData {
    TrajectoryDataset dataset;
    std::optional<GridSeries> grid;
};

ExperimentData make_data(const ExperimentConfig& cfg);
// Loads dataset.bin / grid.bin style files; the format is detected from the header.
ExperimentData load_data(const std::filesystem::path& path);

// Fits the normalizer the config calls for (climate only) and trains.
TrainResult train_model(const ExperimentConfig& cfg, const TrajectoryDataset& dataset);

struct Evaluation {
    ForecastReport report;
    std::vector<KDayRow> k_day;  // climate only
};

// Horizon protocol for both kinds plus the K-day table for climate. `model`
// may be null for the persistence / climatology baselines.
Evaluation evaluate(const ExperimentConfig& cfg, const ExperimentData& data, const KiaModel* model);

std::string format_table_row(const ForecastReport& report, std::string_view setting);

struct AblationRow {
    std::size_t train_size = 0;
    ForecastReport report;
    std::size_t epochs = 0;
};

std::string ablation_csv(const std::vector<AblationRow>& rows);

// Subcommand bodies. Each writes into cfg.out and returns a process exit code.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitLoad = 4;

int run_simulate(const ExperimentConfig& cfg);
int run_train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& dataset_path);
int run_evaluate(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint_path,
                 const std::optional<std::filesystem::path>& dataset_path);
int run_ablation(const ExperimentConfig& cfg);

// Writes metadata.json for a run directory: config echo, seeds, format versions, extras.
void write_metadata(const std::filesystem::path& dir, const ExperimentConfig& cfg, std::string_view command,
                    const nlohmann::json& extra);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace kia
