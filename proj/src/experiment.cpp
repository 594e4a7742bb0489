#include "kia/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "kia/checkpoint.hpp"
#include "kia/errors.hpp"

namespace kia {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(ExperimentKind kind) { return kind == ExperimentKind::Pendulum ? "pendulum" : "climate"; }

ExperimentKind parse_experiment_kind(std::string_view name) {
    if (name == "pendulum") return ExperimentKind::Pendulum;
    if (name == "climate") return ExperimentKind::Climate;
    throw ConfigError("unknown experiment '" + std::string(name) + "' (expected pendulum or climate)");
}

json SeedPlan::to_json() const {
    return {{"master", master},   {"embedding", embedding()}, {"noise", noise()},
            {"init", init()},     {"shuffle", shuffle()},     {"grid", grid()}};
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    if (kind == ExperimentKind::Climate) {
        c.train.k_steps = 4;
        c.eval.horizon = 180;
        c.normalize = true;
        c.split = {c.grid.years - 2, 1, 1};
    }
    return c;
}

namespace {

// Reads an optional key into `dst`, turning json type errors into ConfigError.
template <typename T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config field " + where + key + ": " + e.what());
    }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    std::set<std::string> names(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!names.count(it.key())) throw ConfigError("unknown config field " + where + it.key());
    }
}

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    auto it = j.find(key);
    return it == j.end() ? empty : *it;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown(j,
                   {"experiment", "model", "seed", "out", "pendulum", "split", "embed_dim", "noise_std", "train_size",
                    "grid", "architecture", "training", "loss_weights", "evaluation", "ablation_sizes"},
                   "");
    std::string kind = "pendulum";
    read(j, "experiment", kind, "");
    ExperimentConfig c = defaults(parse_experiment_kind(kind));

    std::string model = c.model;
    read(j, "model", model, "");
    c.set_model(model);
    read(j, "seed", c.seed, "");
    read(j, "out", c.out, "");
    read(j, "embed_dim", c.embed_dim, "");
    read(j, "noise_std", c.noise_std, "");
    if (auto it = j.find("train_size"); it != j.end() && !it->is_null()) {
        std::size_t n = 0;
        read(j, "train_size", n, "");
        c.train_size = n;
    }
    if (auto it = j.find("split"); it != j.end()) {
        std::vector<std::size_t> s;
        read(j, "split", s, "");
        if (s.size() != 3) throw ConfigError("config field split must list 3 lengths");
        c.split = {s[0], s[1], s[2]};
    }
    read(j, "ablation_sizes", c.ablation_sizes, "");

    const json& p = section(j, "pendulum");
    reject_unknown(p, {"theta0", "omega0", "g", "length", "t_start", "t_end", "n_points", "substeps"}, "pendulum.");
    read(p, "theta0", c.pendulum.theta0, "pendulum.");
    read(p, "omega0", c.pendulum.omega0, "pendulum.");
    read(p, "g", c.pendulum.g, "pendulum.");
    read(p, "length", c.pendulum.length, "pendulum.");
    read(p, "t_start", c.pendulum.t_start, "pendulum.");
    read(p, "t_end", c.pendulum.t_end, "pendulum.");
    read(p, "n_points", c.pendulum.n_points, "pendulum.");
    read(p, "substeps", c.pendulum.substeps, "pendulum.");

    const json& g = section(j, "grid");
    reject_unknown(g,
                   {"height", "width", "years", "weather_std", "trend_per_year", "interannual_amplitude",
                    "interannual_period_years", "region"},
                   "grid.");
    read(g, "height", c.grid.height, "grid.");
    read(g, "width", c.grid.width, "grid.");
    read(g, "years", c.grid.years, "grid.");
    read(g, "weather_std", c.grid.weather_std, "grid.");
    read(g, "trend_per_year", c.grid.trend_per_year, "grid.");
    read(g, "interannual_amplitude", c.grid.interannual_amplitude, "grid.");
    read(g, "interannual_period_years", c.grid.interannual_period_years, "grid.");
    read(g, "region", c.grid.region, "grid.");
    if (c.kind == ExperimentKind::Climate && c.grid.years >= 2) c.split = {c.grid.years - 2, 1, 1};

    const json& a = section(j, "architecture");
    reject_unknown(a, {"hidden", "latent_dim", "coupling_depth", "coupling_bias", "koopman_init", "normalize"},
                   "architecture.");
    read(a, "hidden", c.hidden, "architecture.");
    read(a, "latent_dim", c.latent_dim, "architecture.");
    read(a, "coupling_depth", c.coupling_depth, "architecture.");
    read(a, "coupling_bias", c.coupling_bias, "architecture.");
    read(a, "normalize", c.normalize, "architecture.");
    if (a.contains("koopman_init")) {
        std::string init;
        read(a, "koopman_init", init, "architecture.");
        c.koopman_init = parse_koopman_init(init);
    }

    const json& t = section(j, "training");
    reject_unknown(t, {"k_steps", "batch_size", "learning_rate", "max_epochs", "patience"}, "training.");
    read(t, "k_steps", c.train.k_steps, "training.");
    read(t, "batch_size", c.train.batch_size, "training.");
    read(t, "learning_rate", c.train.learning_rate, "training.");
    read(t, "max_epochs", c.train.max_epochs, "training.");
    read(t, "patience", c.train.patience, "training.");

    const json& w = section(j, "loss_weights");
    reject_unknown(w, {"recon", "fwd", "bwd", "con"}, "loss_weights.");
    read(w, "recon", c.weights.recon, "loss_weights.");
    read(w, "fwd", c.weights.fwd, "loss_weights.");
    read(w, "con", c.weights.con, "loss_weights.");
    if (w.contains("bwd")) {
        double bwd = 0.0;
        read(w, "bwd", bwd, "loss_weights.");
        c.set_bwd_weight(bwd);
    }

    const json& e = section(j, "evaluation");
    reject_unknown(e, {"horizon", "inits", "clean_targets", "k_day"}, "evaluation.");
    read(e, "horizon", c.eval.horizon, "evaluation.");
    read(e, "inits", c.eval.inits, "evaluation.");
    read(e, "clean_targets", c.eval.clean_targets, "evaluation.");
    read(e, "k_day", c.eval.k_day, "evaluation.");
    return c;
}

json ExperimentConfig::to_json() const {
    const LossWeights w = effective_weights();
    json j;
    j["experiment"] = to_string(kind);
    j["model"] = model;
    j["seed"] = seed;
    j["out"] = out;
    j["split"] = {split.train, split.val, split.test};
    j["embed_dim"] = embed_dim;
    j["noise_std"] = noise_std;
    j["train_size"] = train_size ? json(*train_size) : json(nullptr);
    j["pendulum"] = {{"theta0", pendulum.theta0},   {"omega0", pendulum.omega0},    {"g", pendulum.g},
                     {"length", pendulum.length},   {"t_start", pendulum.t_start},  {"t_end", pendulum.t_end},
                     {"n_points", pendulum.n_points}, {"substeps", pendulum.substeps}};
    j["grid"] = {{"height", grid.height},
                 {"width", grid.width},
                 {"years", grid.years},
                 {"weather_std", grid.weather_std},
                 {"trend_per_year", grid.trend_per_year},
                 {"interannual_amplitude", grid.interannual_amplitude},
                 {"interannual_period_years", grid.interannual_period_years},
                 {"region", grid.region}};
    j["architecture"] = {{"hidden", hidden},
                         {"latent_dim", latent_dim},
                         {"coupling_depth", coupling_depth},
                         {"coupling_bias", coupling_bias},
                         {"koopman_init", to_string(koopman_init)},
                         {"normalize", normalize}};
    j["training"] = {{"k_steps", train.k_steps},
                     {"batch_size", train.batch_size},
                     {"learning_rate", train.learning_rate},
                     {"max_epochs", train.max_epochs},
                     {"patience", train.patience}};
    j["loss_weights"] = {{"recon", w.recon}, {"fwd", w.fwd}, {"bwd", w.bwd}, {"con", w.con}};
    j["evaluation"] = {{"horizon", eval.horizon},
                       {"inits", eval.inits},
                       {"clean_targets", eval.clean_targets},
                       {"k_day", eval.k_day}};
    j["ablation_sizes"] = ablation_sizes;
    return j;
}

void ExperimentConfig::set_model(std::string_view name) {
    if (name == "persistence" || name == "climatology") {
        model = std::string(name);
        return;
    }
    model = to_string(parse_variant(std::string(name)));
}

void ExperimentConfig::set_bwd_weight(double value) {
    weights.bwd = value;
    bwd_weight_set = true;
}

bool ExperimentConfig::learned() const { return model != "persistence" && model != "climatology"; }

Variant ExperimentConfig::variant() const {
    if (!learned()) throw ConfigError("model '" + model + "' is a baseline without a trainable variant");
    return parse_variant(model);
}

ModelSpec ExperimentConfig::model_spec(std::size_t input_dim) const {
    ModelSpec s;
    s.variant = variant();
    s.input_dim = input_dim;
    s.hidden = hidden;
    s.latent_dim = latent_dim;
    s.coupling_depth = coupling_depth;
    s.coupling_bias = coupling_bias;
    s.koopman_init = koopman_init;
    s.seed = seeds().init();
    return s;
}

LossWeights ExperimentConfig::effective_weights() const {
    LossWeights w = weights;
    if (learned() && variant() == Variant::KAE && !bwd_weight_set) w.bwd = 0.0;
    return w;
}

void ExperimentConfig::validate() const {
    if (learned()) {
        effective_weights().validate(variant());
        train.validate();
        model_spec(kind == ExperimentKind::Pendulum ? embed_dim : grid.height * grid.width).validate();
    }
    if (model == "climatology" && kind != ExperimentKind::Climate) {
        throw ConfigError("the climatology baseline needs the climate experiment");
    }
    if (kind == ExperimentKind::Pendulum) {
        pendulum.validate();
        if (embed_dim < 2) throw ConfigError("embed_dim must be at least 2");
        if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
        if (split.total() != pendulum.n_points) {
            throw ConfigError("split lengths sum to " + std::to_string(split.total()) + ", pendulum has " +
                              std::to_string(pendulum.n_points) + " points");
        }
        if (train_size && (*train_size == 0 || *train_size > split.train)) {
            throw ConfigError("train_size " + std::to_string(*train_size) + " exceeds the " +
                              std::to_string(split.train) + " available training points");
        }
        for (std::size_t s : ablation_sizes) {
            if (s == 0 || s > split.train) {
                throw ConfigError("ablation size " + std::to_string(s) + " exceeds the " +
                                  std::to_string(split.train) + " available training points");
            }
        }
    } else {
        grid.validate();
        if (train_size) throw ConfigError("train_size applies to the pendulum experiment only");
    }
    if (eval.horizon == 0 || eval.inits == 0) throw ConfigError("evaluation horizon and inits must be positive");
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

TrajectoryDataset make_pendulum_dataset(const ExperimentConfig& cfg) {
    const SeedPlan seeds = cfg.seeds();
    TrajectoryDataset ds = with_split(simulate_pendulum(cfg.pendulum), cfg.split);
    ds = orthogonal_embed(ds, cfg.embed_dim, seeds.embedding());
    ds = add_gaussian_noise(ds, cfg.noise_std, seeds.noise());
    if (cfg.train_size && *cfg.train_size != ds.split.train) ds = truncate_train(ds, *cfg.train_size);
    ds.seed = seeds.master;
    ds.provenance["theta0"] = cfg.pendulum.theta0;
    return ds;
}

GridSeries make_grid(const ExperimentConfig& cfg) {
    SyntheticSstParams p = cfg.grid;
    p.seed = cfg.seeds().grid();
    return with_climatology(generate_synthetic_sst(p));
}

ExperimentData make_data(const ExperimentConfig& cfg) {
    if (cfg.kind == ExperimentKind::Pendulum) return {make_pendulum_dataset(cfg), std::nullopt};
    GridSeries grid = make_grid(cfg);
    TrajectoryDataset ds = grid_to_dataset(grid);
    return {std::move(ds), std::move(grid)};
}

ExperimentData load_data(const fs::path& path) {
    const std::string format = peek_format(path);
    if (format == "kia-dataset") return {load_dataset(path), std::nullopt};
    if (format == "kia-grid") {
        GridSeries grid = load_grid(path);
        if (!grid.climatology) grid = with_climatology(std::move(grid));
        TrajectoryDataset ds = grid_to_dataset(grid);
        return {std::move(ds), std::move(grid)};
    }
    throw LoadError(LoadError::Kind::Header, path.string() + ": unknown file format '" + format + "'");
}

TrainResult train_model(const ExperimentConfig& cfg, const TrajectoryDataset& dataset) {
    KiaModel model = KiaModel::create(cfg.model_spec(dataset.dim()));
    if (cfg.normalize) {
        const Segment train = dataset.views().train;
        Tensor rows = Tensor::matrix(train.length, dataset.dim());
        for (std::size_t r = 0; r < train.length; ++r) {
            auto src = dataset.observations.row_span(train.begin + r);
            std::copy(src.begin(), src.end(), rows.row_span(r).begin());
        }
        model.set_normalizer(Normalizer::fit(rows));
    }
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seeds().shuffle();
    return train(std::move(model), dataset, tc, cfg.effective_weights());
}

Evaluation evaluate(const ExperimentConfig& cfg, const ExperimentData& data, const KiaModel* model) {
    const TrajectoryDataset& ds = data.dataset;
    std::unique_ptr<Forecaster> forecaster;
    if (cfg.learned()) {
        if (!model) throw ConfigError("model '" + cfg.model + "' needs a checkpoint to evaluate");
        forecaster = std::make_unique<ModelForecaster>(*model);
    } else if (cfg.model == "persistence") {
        forecaster = std::make_unique<PersistenceForecaster>();
    } else {
        if (!data.grid || !data.grid->climatology) {
            throw ConfigError("the climatology baseline needs gridded data with a climatology");
        }
        forecaster = std::make_unique<ClimatologyForecaster>(*data.grid->climatology);
    }

    const Tensor& targets = cfg.eval.clean_targets && ds.clean ? *ds.clean : ds.observations;
    const bool climate = data.grid.has_value();
    const ErrorMetric metric = climate ? ErrorMetric::CelsiusMae : ErrorMetric::Relative;
    const Segment test = ds.views().test;

    Evaluation out;
    out.report = evaluate_horizon(*forecaster, ds.observations, targets, test, cfg.eval.inits, cfg.eval.horizon, metric);
    json meta;
    meta["experiment"] = climate ? "climate" : "pendulum";
    meta["model"] = forecaster->name();
    meta["seed"] = cfg.seed;
    meta["noise_std"] = ds.noise_std;
    meta["clean_targets"] = cfg.eval.clean_targets && ds.clean.has_value();
    meta["train_points"] = ds.split.train;
    if (climate) {
        meta["setting"] = data.grid->region;
    } else {
        meta["setting"] = ds.provenance.value("theta0", cfg.pendulum.theta0);
    }
    if (model) {
        meta["k_steps"] = cfg.train.k_steps;
        meta["coupling_depth"] = model->spec().coupling_depth;
    }
    out.report.metadata = meta;
    if (climate) out.k_day = evaluate_k_day(*forecaster, ds.observations, test, cfg.eval.k_day);
    return out;
}

namespace {

std::string fixed(double v, int digits = 4) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string setting_label(const json& meta) {
    const json& s = meta.at("setting");
    if (s.is_string()) return s.get<std::string>();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s.get<double>());
    return buf;
}

}  // namespace

std::string format_table_row(const ForecastReport& r, std::string_view setting) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-10s %8s +- %-8s %8s +- %-8s %8s +- %-8s", r.model.c_str(),
                  std::string(setting).c_str(), fixed(r.all.mean).c_str(), fixed(r.all.std).c_str(),
                  fixed(r.first100.mean).c_str(), fixed(r.first100.std).c_str(), fixed(r.last100.mean).c_str(),
                  fixed(r.last100.std).c_str());
    return buf;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "train_size,model,all_mean,all_std,first100_mean,first100_std,last100_mean,last100_std,epochs\n";
    auto num = [](double v) {
        if (!std::isfinite(v)) return std::string(std::isnan(v) ? "nan" : "inf");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        const auto& rep = r.report;
        out += std::to_string(r.train_size) + "," + rep.model + "," + num(rep.all.mean) + "," + num(rep.all.std) + "," +
               num(rep.first100.mean) + "," + num(rep.first100.std) + "," + num(rep.last100.mean) + "," +
               num(rep.last100.std) + "," + std::to_string(r.epochs) + "\n";
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_metadata(const fs::path& dir, const ExperimentConfig& cfg, std::string_view command, const json& extra) {
    const fs::path path = dir / "metadata.json";
    json meta = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            in >> meta;
        } catch (const json::exception&) {
            meta = json::object();
        }
    }
    meta["config"] = cfg.to_json();
    meta["seeds"] = cfg.seeds().to_json();
    meta["format_versions"] = {{"dataset", kDatasetVersion}, {"grid", kGridVersion}, {"checkpoint", kCheckpointVersion}};
    meta["commands"][std::string(command)] = extra;
    write_text(path, meta.dump(2) + "\n");
}

namespace {

fs::path prepare_out(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out);
    fs::create_directories(dir);
    write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
    return dir;
}

json dataset_summary(const ExperimentData& data) {
    const auto& ds = data.dataset;
    return {{"rows", ds.n_points()},
            {"cols", ds.dim()},
            {"split", {ds.split.train, ds.split.val, ds.split.test}},
            {"noise_std", ds.noise_std},
            {"dt", ds.dt}};
}

void save_data(const ExperimentData& data, const fs::path& dir) {
    if (data.grid) {
        save_grid(*data.grid, dir / "grid.bin");
    } else {
        save_dataset(data.dataset, dir / "dataset.bin");
    }
}

json train_summary(const TrainResult& r) {
    json j{{"epochs", r.history.size()}, {"best_epoch", r.best_epoch}, {"early_stopped", r.early_stopped}};
    if (!r.history.empty() && r.best_epoch >= 1) {
        const auto& best = r.history.at(r.best_epoch - 1);
        j["best"] = {{"L_recon", best.train.recon},
                     {"L_fwd", best.train.fwd},
                     {"L_bwd", best.train.bwd},
                     {"L_total_train", best.total_train},
                     {"L_total_val", best.total_val}};
    }
    return j;
}

void write_evaluation(const fs::path& dir, const Evaluation& ev) {
    write_text(dir / "report.csv", ev.report.steps_csv());
    write_text(dir / "summary.json", ev.report.summary_json().dump(2) + "\n");
    if (!ev.k_day.empty()) write_text(dir / "kday.csv", k_day_csv(ev.report.model, ev.k_day));
}

void print_table_header(bool climate) {
    std::printf("%-12s %-10s %-20s %-20s %-20s\n", "model", climate ? "region" : "theta0", "all", "first100",
                "last100");
}

}  // namespace

int run_simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path dir = prepare_out(cfg);
    const ExperimentData data = make_data(cfg);
    save_data(data, dir);
    write_metadata(dir, cfg, "simulate", dataset_summary(data));
    std::printf("wrote %s (%zu x %zu)\n", (dir / (data.grid ? "grid.bin" : "dataset.bin")).string().c_str(),
                data.dataset.n_points(), data.dataset.dim());
    return kExitOk;
}

int run_train(const ExperimentConfig& cfg, const std::optional<fs::path>& dataset_path) {
    cfg.validate();
    if (!cfg.learned()) throw ConfigError("model '" + cfg.model + "' has no parameters to train");
    const fs::path dir = prepare_out(cfg);
    ExperimentData data = dataset_path ? load_data(*dataset_path) : make_data(cfg);
    if (dataset_path && cfg.train_size && *cfg.train_size != data.dataset.split.train) {
        data.dataset = truncate_train(data.dataset, *cfg.train_size);
    }
    if (!dataset_path) save_data(data, dir);

    json extra = dataset_summary(data);
    extra["dataset"] = dataset_path ? dataset_path->string() : (dir / (data.grid ? "grid.bin" : "dataset.bin")).string();
    try {
        const TrainResult result = train_model(cfg, data.dataset);
        save_checkpoint(result.model, dir / "checkpoint.bin");
        write_text(dir / "history.csv", history_csv(result.history));
        extra["training"] = train_summary(result);
        write_metadata(dir, cfg, "train", extra);
        std::printf("trained %s: %zu epochs, best epoch %zu%s\n", cfg.model.c_str(), result.history.size(),
                    result.best_epoch, result.early_stopped ? " (early stop)" : "");
        return kExitOk;
    } catch (const DivergenceError& e) {
        extra["diverged"] = {{"epoch", e.epoch()}, {"component", e.component()}, {"message", e.what()}};
        write_metadata(dir, cfg, "train", extra);
        std::fprintf(stderr, "kia: %s\n", e.what());
        return kExitDivergence;
    }
}

int run_evaluate(const ExperimentConfig& cfg_in, const std::optional<fs::path>& checkpoint_path,
                 const std::optional<fs::path>& dataset_path) {
    ExperimentConfig cfg = cfg_in;
    std::optional<KiaModel> model;
    if (cfg.learned()) {
        const fs::path ckpt = checkpoint_path ? *checkpoint_path : fs::path(cfg.out) / "checkpoint.bin";
        model = load_checkpoint(ckpt);
        cfg.set_model(to_string(model->variant()));
    }
    cfg.validate();
    const fs::path dir = prepare_out(cfg);
    const ExperimentData data = dataset_path ? load_data(*dataset_path) : make_data(cfg);
    if (model && model->input_dim() != data.dataset.dim()) {
        throw ConfigError("checkpoint expects observations of width " + std::to_string(model->input_dim()) +
                          ", dataset is " + shape_string(data.dataset.observations.shape()));
    }
    const Evaluation ev = evaluate(cfg, data, model ? &*model : nullptr);
    write_evaluation(dir, ev);
    json extra = ev.report.summary_json();
    extra.erase("init_indices");
    write_metadata(dir, cfg, "evaluate", extra);

    print_table_header(data.grid.has_value());
    std::printf("%s\n", format_table_row(ev.report, setting_label(ev.report.metadata)).c_str());
    if (ev.report.excluded_steps) std::printf("excluded zero-norm steps: %zu\n", ev.report.excluded_steps);
    if (!ev.k_day.empty()) {
        std::printf("\n%-12s", "lead (days)");
        for (const auto& row : ev.k_day) std::printf(" %8zu", row.lead);
        std::printf("\n%-12s", "MAE (C)");
        for (const auto& row : ev.k_day) std::printf(" %8s", fixed(row.mean_mae, 3).c_str());
        std::printf("\n");
    }
    return kExitOk;
}

int run_ablation(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.kind != ExperimentKind::Pendulum) throw ConfigError("the training-size ablation is a pendulum experiment");
    if (!cfg.learned()) throw ConfigError("the ablation trains a model; got baseline '" + cfg.model + "'");
    const fs::path dir = prepare_out(cfg);
    std::vector<AblationRow> rows;
    json runs = json::array();
    for (std::size_t size : cfg.ablation_sizes) {
        ExperimentConfig sub = cfg;
        sub.train_size = size;
        sub.out = (dir / ("train_" + std::to_string(size))).string();
        fs::create_directories(sub.out);
        const ExperimentData data = make_data(sub);
        TrainResult result = [&] {
            try {
                return train_model(sub, data.dataset);
            } catch (const DivergenceError& e) {
                write_metadata(sub.out, sub, "ablation", {{"diverged", e.what()}});
                throw;
            }
        }();
        save_checkpoint(result.model, fs::path(sub.out) / "checkpoint.bin");
        write_text(fs::path(sub.out) / "history.csv", history_csv(result.history));
        const Evaluation ev = evaluate(sub, data, &result.model);
        write_evaluation(sub.out, ev);
        write_metadata(sub.out, sub, "ablation", {{"training", train_summary(result)}});
        rows.push_back({size, ev.report, result.history.size()});
        runs.push_back(sub.out);
    }
    write_text(dir / "ablation.csv", ablation_csv(rows));
    write_metadata(dir, cfg, "ablation", {{"runs", runs}});

    std::printf("%-10s %-8s %-20s\n", "points", "model", "all");
    for (const auto& r : rows) {
        std::printf("%-10zu %-8s %8s +- %-8s\n", r.train_size, r.report.model.c_str(), fixed(r.report.all.mean).c_str(),
                    fixed(r.report.all.std).c_str());
    }
    return kExitOk;
}

}  // namespace kia
