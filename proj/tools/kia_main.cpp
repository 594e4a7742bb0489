#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kia/errors.hpp"
#include "kia/experiment.hpp"
#include "kia/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every subcommand; unset ones leave the config value alone.
struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> experiment;
    std::optional<std::string> model;

    std::optional<double> theta0;
    std::optional<double> noise;
    std::optional<std::size_t> train_size;
    std::optional<std::size_t> embed_dim;

    std::optional<std::size_t> height;
    std::optional<std::size_t> width;
    std::optional<std::size_t> years;
    std::optional<std::string> region;

    std::optional<std::size_t> k_steps;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> patience;
    std::optional<std::size_t> batch;
    std::optional<double> lr;
    std::optional<double> lambda_recon;
    std::optional<double> lambda_fwd;
    std::optional<double> lambda_bwd;
    std::optional<double> lambda_con;

    std::optional<std::size_t> latent;
    std::optional<std::size_t> depth;
    bool coupling_bias = false;
    std::optional<std::string> koopman_init;

    std::optional<std::size_t> horizon;
    std::optional<std::size_t> inits;
    std::vector<std::size_t> k_day;
    bool clean_targets = false;
    std::vector<std::size_t> sizes;
};

void add_shared(CLI::App& app, Overrides& o) {
    app.add_option("--config", o.config, "JSON experiment config");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--experiment", o.experiment, "pendulum | climate");
    app.add_option("--model", o.model, "KIA | KAE | CKAE | persistence | climatology");

    app.add_option("--theta0", o.theta0, "initial pendulum angle (rad)");
    app.add_option("--noise", o.noise, "observation noise std");
    app.add_option("--train-size", o.train_size, "keep only the last N training points");
    app.add_option("--embed-dim", o.embed_dim, "observation dimension of the orthogonal embedding");

    app.add_option("--height", o.height, "synthetic grid height");
    app.add_option("--width", o.width, "synthetic grid width");
    app.add_option("--years", o.years, "synthetic grid length in years");
    app.add_option("--region", o.region, "region label for the synthetic grid");

    app.add_option("--k", o.k_steps, "prediction steps per training window");
    app.add_option("--epochs", o.epochs, "maximum epochs");
    app.add_option("--patience", o.patience, "early-stopping patience (epochs)");
    app.add_option("--batch", o.batch, "batch size");
    app.add_option("--lr", o.lr, "Adam learning rate");
    app.add_option("--lambda-recon", o.lambda_recon, "reconstruction weight");
    app.add_option("--lambda-fwd", o.lambda_fwd, "forward weight");
    app.add_option("--lambda-bwd", o.lambda_bwd, "backward weight");
    app.add_option("--lambda-con", o.lambda_con, "C-KAE consistency weight");

    app.add_option("--latent", o.latent, "latent dimension");
    app.add_option("--depth", o.depth, "coupling blocks in the invertible operator");
    app.add_flag("--coupling-bias", o.coupling_bias, "affine coupling maps (adds biases)");
    app.add_option("--koopman-init", o.koopman_init, "rotation | identity | glorot");

    app.add_option("--horizon", o.horizon, "rollout length");
    app.add_option("--inits", o.inits, "number of initial conditions");
    app.add_option("--k-day", o.k_day, "K-day leads, e.g. 1,7,14,21,30")->delimiter(',');
    app.add_flag("--clean-targets", o.clean_targets, "score against the noise-free series");
    app.add_option("--sizes", o.sizes, "ablation training sizes, e.g. 200,300,400")->delimiter(',');
}

kia::ExperimentConfig build_config(const Overrides& o) {
    json j = json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw kia::ConfigError("cannot read config " + o.config);
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw kia::ConfigError("config " + o.config + " is not valid JSON: " + e.what());
        }
    }
    if (o.experiment) j["experiment"] = *o.experiment;
    kia::ExperimentConfig c = kia::ExperimentConfig::from_json(j);

    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.model) c.set_model(*o.model);
    if (o.theta0) c.pendulum.theta0 = *o.theta0;
    if (o.noise) c.noise_std = *o.noise;
    if (o.train_size) c.train_size = *o.train_size;
    if (o.embed_dim) c.embed_dim = *o.embed_dim;
    if (o.height) c.grid.height = *o.height;
    if (o.width) c.grid.width = *o.width;
    if (o.years) {
        c.grid.years = *o.years;
        if (c.kind == kia::ExperimentKind::Climate && c.grid.years >= 2) c.split = {c.grid.years - 2, 1, 1};
    }
    if (o.region) c.grid.region = *o.region;
    if (o.k_steps) c.train.k_steps = *o.k_steps;
    if (o.epochs) c.train.max_epochs = *o.epochs;
    if (o.patience) c.train.patience = *o.patience;
    if (o.batch) c.train.batch_size = *o.batch;
    if (o.lr) c.train.learning_rate = *o.lr;
    if (o.lambda_recon) c.weights.recon = *o.lambda_recon;
    if (o.lambda_fwd) c.weights.fwd = *o.lambda_fwd;
    if (o.lambda_bwd) c.set_bwd_weight(*o.lambda_bwd);
    if (o.lambda_con) c.weights.con = *o.lambda_con;
    if (o.latent) c.latent_dim = *o.latent;
    if (o.depth) c.coupling_depth = *o.depth;
    if (o.coupling_bias) c.coupling_bias = true;
    if (o.koopman_init) c.koopman_init = kia::parse_koopman_init(*o.koopman_init);
    if (o.horizon) c.eval.horizon = *o.horizon;
    if (o.inits) c.eval.inits = *o.inits;
    if (!o.k_day.empty()) c.eval.k_day = o.k_day;
    if (o.clean_targets) c.eval.clean_targets = true;
    if (!o.sizes.empty()) c.ablation_sizes = o.sizes;
    return c;
}

std::optional<fs::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

int run_report_cmd(const std::vector<std::string>& dirs, const std::string& out, bool log_scale) {
    std::vector<fs::path> paths(dirs.begin(), dirs.end());
    const auto result = kia::build_report(paths, out.empty() ? fs::path("report") : fs::path(out), log_scale);
    for (const auto& [dir, why] : result.skipped) std::fprintf(stderr, "skipped %s: %s\n", dir.string().c_str(), why.c_str());
    std::printf("%-12s %-10s %-8s %-20s %-20s %-20s\n", "model", "setting", "noise", "all", "first100", "last100");
    for (const auto& r : result.runs) {
        auto cell = [](const kia::Aggregate& a) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.4f +- %.4f", a.mean, a.std);
            return std::string(buf);
        };
        std::printf("%-12s %-10s %-8g %-20s %-20s %-20s\n", r.model.c_str(), r.setting.c_str(), r.noise_std,
                    cell(r.all).c_str(), cell(r.first100).c_str(), cell(r.last100).c_str());
    }
    for (const auto& c : result.charts) std::printf("chart %s\n", c.string().c_str());
    return kia::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman invertible autoencoder experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    add_shared(app, o);

    std::string dataset, checkpoint, report_out;
    std::vector<std::string> run_dirs;
    bool log_scale = false;

    auto* simulate = app.add_subcommand("simulate", "generate a pendulum dataset or synthetic grid");
    auto* train = app.add_subcommand("train", "train a model and write checkpoint + history");
    train->add_option("--dataset", dataset, "dataset or grid file (generated from the config when omitted)");
    auto* evaluate = app.add_subcommand("evaluate", "roll out a model or baseline and score it");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file (default OUT/checkpoint.bin)");
    evaluate->add_option("--dataset", dataset, "dataset or grid file (generated from the config when omitted)");
    auto* report = app.add_subcommand("report", "combine evaluated runs into a CSV table and SVG charts");
    report->add_option("runs", run_dirs, "evaluated run directories")->required();
    report->add_flag("--log-scale", log_scale, "logarithmic error axis");
    auto* ablation = app.add_subcommand("ablation", "train and evaluate per training-set size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kia::kExitConfig;
    }

    try {
        if (report->parsed()) return run_report_cmd(run_dirs, o.out.value_or("report"), log_scale);
        const kia::ExperimentConfig cfg = build_config(o);
        if (simulate->parsed()) return kia::run_simulate(cfg);
        if (train->parsed()) return kia::run_train(cfg, opt_path(dataset));
        if (evaluate->parsed()) return kia::run_evaluate(cfg, opt_path(checkpoint), opt_path(dataset));
        if (ablation->parsed()) return kia::run_ablation(cfg);
    } catch (const kia::LoadError& e) {
        std::fprintf(stderr, "kia: load error: %s\n", e.what());
        return kia::kExitLoad;
    } catch (const kia::DivergenceError& e) {
        std::fprintf(stderr, "kia: %s\n", e.what());
        return kia::kExitDivergence;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "kia: configuration error: %s\n", e.what());
        return kia::kExitConfig;
    } catch (const kia::UnsupportedOperation& e) {
        std::fprintf(stderr, "kia: configuration error: %s\n", e.what());
        return kia::kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kia: %s\n", e.what());
        return kia::kExitFailure;
    }
    return kia::kExitFailure;
}
