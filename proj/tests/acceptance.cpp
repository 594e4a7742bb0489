// One line per criterion. Exit status is the number of failed criteria.
// Usage: kia_acceptance [--criteria 1,2,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kia/experiment.hpp"
#include "kia/grad_check.hpp"
#include "kia/training.hpp"

using namespace kia;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kInvertTol = 1e-9;
constexpr double kLinearTol = 1e-10;
constexpr double kGradTol = 1e-5;
constexpr double kCleanErrorMax = 0.05;
constexpr double kLongHorizonRatio = 5.0;
constexpr double kClimatologySpread = 1e-12;
constexpr double kInvertBudgetSeconds = 1.0;
constexpr double kTrainBudgetSeconds = 15 * 60.0;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Tensor normal_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::normal_distribution<double> n;
    Tensor t = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
    return t;
}

ModelSpec latent_only_spec(std::size_t depth, std::uint64_t seed) {
    ModelSpec s;
    s.variant = Variant::KIA;
    s.input_dim = 8;
    s.hidden = {};
    s.latent_dim = 8;
    s.coupling_depth = depth;
    s.koopman_init = KoopmanInit::Glorot;
    s.seed = seed;
    return s;
}

// Pendulum runs are memoized on the config JSON; several criteria share them.
struct RunSummary {
    ForecastReport report;
    double seconds = 0.0;
    std::size_t epochs = 0;
};

std::map<std::string, RunSummary> g_runs;

const RunSummary& pendulum_run(const std::string& model, double theta0, double noise, std::uint64_t seed,
                               std::optional<std::size_t> train_size = std::nullopt) {
    ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::Pendulum);
    cfg.set_model(model);
    cfg.pendulum.theta0 = theta0;
    cfg.noise_std = noise;
    cfg.seed = seed;
    cfg.train_size = train_size;
    cfg.validate();
    const std::string key = cfg.to_json().dump();
    if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;

    const auto t0 = Clock::now();
    const ExperimentData data = make_data(cfg);
    const TrainResult trained = train_model(cfg, data.dataset);
    RunSummary s;
    s.report = evaluate(cfg, data, &trained.model).report;
    s.seconds = seconds_since(t0);
    s.epochs = trained.history.size();
    std::cerr << "  [run] " << model << " theta0=" << theta0 << " noise=" << noise << " seed=" << seed
              << (train_size ? " n=" + std::to_string(*train_size) : std::string()) << ": all=" << fmt(s.report.all.mean)
              << " last100=" << fmt(s.report.last100.mean) << " epochs=" << s.epochs << " " << fmt(s.seconds)
              << "s\n";
    return g_runs.emplace(key, std::move(s)).first->second;
}

double seed_mean(const std::function<double(std::uint64_t)>& f) {
    double acc = 0.0;
    for (std::uint64_t s : kSeeds) acc += f(s);
    return acc / static_cast<double>(kSeeds.size());
}

Outcome c1_invertibility() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (std::size_t depth : {1u, 2u, 4u, 8u}) {
        const KiaModel m = KiaModel::create(latent_only_spec(depth, 10 + depth));
        const Tensor z = normal_matrix(rng, 1000, 8);
        worst = std::max(worst, max_abs_diff(m.koopman_power(m.koopman_power(z, 1), -1), z));
    }
    const double secs = seconds_since(t0);
    return {worst <= kInvertTol && secs < kInvertBudgetSeconds,
            "max |inv(fwd(z)) - z| = " + fmt(worst) + " (tol " + fmt(kInvertTol) + "), " + fmt(secs) + " s"};
}

Outcome c2_linearity() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    const KiaModel m = KiaModel::create(latent_only_spec(4, 77));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor a = normal_matrix(rng, 1, 8), b = normal_matrix(rng, 1, 8);
        const double alpha = coef(rng), beta = coef(rng);
        const Tensor lhs = m.koopman_power(kernels::add(kernels::scale(a, alpha), kernels::scale(b, beta)), 1);
        const Tensor rhs = kernels::add(kernels::scale(m.koopman_power(a, 1), alpha),
                                        kernels::scale(m.koopman_power(b, 1), beta));
        worst = std::max(worst, max_abs_diff(lhs, rhs));
    }
    return {worst <= kLinearTol, "max linearity defect = " + fmt(worst) + " (tol " + fmt(kLinearTol) + ")"};
}

Outcome c3_gradients() {
    double worst = 0.0;
    for (std::uint64_t seed : kSeeds) {
        ModelSpec s;
        s.variant = Variant::KIA;
        s.input_dim = 4;
        s.hidden = {3};
        s.latent_dim = 2;
        s.coupling_depth = 2;
        s.koopman_init = KoopmanInit::Glorot;
        s.seed = seed;
        const KiaModel m = KiaModel::create(s);
        std::mt19937_64 rng(100 + seed);
        Tensor obs = normal_matrix(rng, 9, 4);
        const std::size_t k = 2;
        const auto anchors = build_windows({0, 9}, k, training_direction(Variant::KIA));
        const LossWeights w{};
        std::vector<Tensor> params;
        for (const Tensor* p : m.parameters()) params.push_back(*p);
        const double err = grad_check(
            [&](Tape&, std::span<const Var> leaves) {
                const BoundModel b(m, leaves);
                return build_objective(b, obs, anchors, k, w).total;
            },
            params, 1e-4);
        worst = std::max(worst, err);
    }
    return {worst <= kGradTol, "max relative gradient error over 3 seeds = " + fmt(worst) + " (tol " + fmt(kGradTol) + ")"};
}

Outcome c4_clean_pendulum() {
    double secs = 0.0;
    const double mean = seed_mean([&](std::uint64_t s) {
        const RunSummary& r = pendulum_run("KIA", 0.8, 0.0, s);
        secs = std::max(secs, r.seconds);
        return r.report.all.mean;
    });
    return {mean <= kCleanErrorMax && secs <= kTrainBudgetSeconds,
            "KIA theta0=0.8 all-step mean relative error = " + fmt(mean) + " (max " + fmt(kCleanErrorMax) +
                "), slowest run " + fmt(secs) + " s"};
}

Outcome c5_long_horizon() {
    const double kia = seed_mean([](std::uint64_t s) { return pendulum_run("KIA", 2.4, 0.0, s).report.last100.mean; });
    const double kae = seed_mean([](std::uint64_t s) { return pendulum_run("KAE", 2.4, 0.0, s).report.last100.mean; });
    const double ratio = kae / kia;
    return {ratio >= kLongHorizonRatio, "theta0=2.4 last-100 KIA " + fmt(kia) + " vs KAE " + fmt(kae) + ", ratio " +
                                            fmt(ratio) + " (min " + fmt(kLongHorizonRatio) + ")"};
}

Outcome c6_noise() {
    bool ok = true;
    std::string detail;
    for (const char* model : {"KIA", "KAE", "CKAE"}) {
        double e[3];
        const double levels[3] = {0.0, 0.1, 0.2};
        for (int i = 0; i < 3; ++i)
            e[i] = seed_mean([&](std::uint64_t s) { return pendulum_run(model, 0.8, levels[i], s).report.all.mean; });
        ok = ok && e[0] <= e[1] && e[1] <= e[2];
        detail += std::string(model) + " " + fmt(e[0]) + " <= " + fmt(e[1]) + " <= " + fmt(e[2]) + "; ";
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome c7_data_size() {
    const double n400 = seed_mean([](std::uint64_t s) { return pendulum_run("KIA", 0.8, 0.0, s).report.all.mean; });
    const double n200 =
        seed_mean([](std::uint64_t s) { return pendulum_run("KIA", 0.8, 0.0, s, 200).report.all.mean; });
    return {n400 <= n200, "KIA mean error with 400 points " + fmt(n400) + " vs 200 points " + fmt(n200)};
}

Outcome c8_climate() {
    ExperimentConfig cfg = ExperimentConfig::defaults(ExperimentKind::Climate);
    cfg.seed = 1;
    const ExperimentData data = make_data(cfg);

    ExperimentConfig clim_cfg = cfg;
    clim_cfg.set_model("climatology");
    const auto clim = evaluate(clim_cfg, data, nullptr).k_day;
    ExperimentConfig pers_cfg = cfg;
    pers_cfg.set_model("persistence");
    const auto pers = evaluate(pers_cfg, data, nullptr).k_day;

    const TrainResult trained = train_model(cfg, data.dataset);
    const auto kia = evaluate(cfg, data, &trained.model).k_day;

    double spread = 0.0;
    for (const auto& row : clim) spread = std::max(spread, std::abs(row.mean_mae - clim.front().mean_mae));
    bool increasing = true;
    for (std::size_t i = 1; i < pers.size(); ++i) increasing = increasing && pers[i].mean_mae > pers[i - 1].mean_mae;
    const double kia30 = kia.back().mean_mae, pers30 = pers.back().mean_mae;

    std::string p;
    for (const auto& row : pers) p += fmt(row.mean_mae) + " ";
    p.pop_back();
    return {spread <= kClimatologySpread && increasing && kia30 < pers30 && kia.back().lead == 30,
            "climatology spread " + fmt(spread) + " (tol " + fmt(kClimatologySpread) + "); persistence [" + p +
                "]; K=30 KIA " + fmt(kia30) + " vs persistence " + fmt(pers30)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(KIA_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome c9_determinism() {
    const fs::path root = fs::path(KIA_TEST_SCRATCH) / "determinism";
    fs::remove_all(root);
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const std::string dir = (root / ("run" + std::to_string(i))).string();
        const std::string seed = " --seed 7 --out " + dir;
        if (cli("simulate" + seed) != 0 || cli("train" + seed + " --dataset " + dir + "/dataset.bin") != 0 ||
            cli("evaluate" + seed + " --dataset " + dir + "/dataset.bin") != 0)
            return {false, "pipeline run " + std::to_string(i) + " failed"};
        reports[i] = slurp(fs::path(dir) / "report.csv");
    }
    const bool same = !reports[0].empty() && reports[0] == reports[1] &&
                      slurp(root / "run0" / "checkpoint.bin") == slurp(root / "run1" / "checkpoint.bin");
    return {same, "seed 7 simulate/train/evaluate twice: report.csv " + std::to_string(reports[0].size()) + " bytes, " +
                      (same ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--criteria" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact invertibility", c1_invertibility},
        {"koopman linearity", c2_linearity},
        {"gradient correctness", c3_gradients},
        {"pendulum clean theta0=0.8", c4_clean_pendulum},
        {"long-horizon ordering", c5_long_horizon},
        {"noise monotonicity", c6_noise},
        {"data-size trend", c7_data_size},
        {"climate baselines", c8_climate},
        {"determinism", c9_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " C" << id << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    return failed;
}
