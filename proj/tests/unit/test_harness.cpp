#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kia/errors.hpp"
#include "kia/experiment.hpp"
#include "kia/report.hpp"

using namespace kia;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(KIA_TEST_SCRATCH) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int kia_cli(const std::string& args) {
    const std::string cmd = std::string(KIA_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small-budget flags so that the CLI round trips stay fast.
const char* kQuick = "--epochs 3 --k 2 --horizon 60 --inits 4";

}  // namespace

TEST_CASE("config: defaults, round trip, unknown keys, overrides") {
    const ExperimentConfig p = ExperimentConfig::defaults(ExperimentKind::Pendulum);
    CHECK(p.model == "KIA");
    CHECK(p.latent_dim == 8);
    CHECK(p.train.batch_size == 64);
    CHECK(p.train.learning_rate == 1e-3);
    CHECK(p.weights.recon == 1.0);
    CHECK(p.weights.fwd == 1.0);
    CHECK(p.weights.bwd == 0.5);
    CHECK(p.eval.horizon == 2000);
    CHECK(p.eval.inits == 30);
    CHECK(p.split.total() == 4000);
    CHECK(p.embed_dim == 64);
    const ExperimentConfig c = ExperimentConfig::defaults(ExperimentKind::Climate);
    CHECK(c.eval.k_day == std::vector<std::size_t>{1, 7, 14, 21, 30});

    ExperimentConfig cfg = p;
    cfg.set_model("CKAE");
    cfg.noise_std = 0.2;
    cfg.pendulum.theta0 = 2.4;
    cfg.seed = 17;
    const json j = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);

    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"learning_rate", 1}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"pendulum", {{"theta", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"model", "RNN"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"seed", "abc"}}), ConfigError);

    ExperimentConfig kae = p;
    kae.set_model("KAE");
    CHECK(kae.effective_weights().bwd == 0.0);
    kae.set_bwd_weight(0.5);
    CHECK_THROWS_AS(kae.validate(), ConfigError);
}

TEST_CASE("seed plan fans out by fixed offsets") {
    const SeedPlan s{7};
    CHECK(s.embedding() == 108);
    CHECK(s.noise() == 209);
    CHECK(s.init() == 310);
    CHECK(s.shuffle() == 411);
    CHECK(s.grid() == 512);
}

TEST_CASE("report: comparison CSV layout and SVG charts") {
    RunRecord a;
    a.model = "KIA";
    a.setting = "0.8";
    a.metric = "relative";
    a.all = {0.0123, 0.002};
    a.mean_curve = {0.01, 0.02, 0.03};
    RunRecord b = a;
    b.model = "KAE";
    b.mean_curve = {0.02, std::nan(""), 0.5};
    const std::vector<RunRecord> runs{a, b};
    const std::string csv = comparison_csv(runs);
    CHECK(csv.rfind("model,setting,noise_std,metric,all,first100,last100\n", 0) == 0);
    CHECK(csv.find("KIA,0.8,0,relative,0.0123±0.0020") != std::string::npos);

    const std::vector<Curve> one{{"KIA", a.mean_curve}};
    const std::string svg1 = svg_chart("t", one, false, "relative error");
    CHECK(svg1.rfind("<svg", 0) == 0);
    CHECK(svg1.find("http://") != std::string::npos);  // namespace only
    CHECK(svg1.find("href") == std::string::npos);
    CHECK(svg1.find(">KIA</text>") != std::string::npos);

    const std::vector<Curve> three{{"KIA", a.mean_curve}, {"KAE", {0.1, 0.2, 0.3}}, {"CKAE", {0.3, 0.2, 0.1}}};
    const std::string svg3 = svg_chart("t", three, true, "relative error");
    std::size_t lines = 0;
    for (std::size_t pos = 0; (pos = svg3.find("<polyline", pos)) != std::string::npos; ++pos) ++lines;
    CHECK(lines == 3);

    // A NaN breaks the polyline into two segments.
    const std::vector<Curve> gap{{"KAE", b.mean_curve}};
    const std::string svg_gap = svg_chart("t", gap, false, "e");
    std::size_t parts = 0;
    for (std::size_t pos = 0; (pos = svg_gap.find("<polyline", pos)) != std::string::npos; ++pos) ++parts;
    CHECK(parts == 2);

    CHECK(mean_curve_from_csv("init,anchor,step,error\n0,5,1,0.5\n1,9,1,1.5\n0,5,2,nan\n1,9,2,2\n") ==
          std::vector<double>{1.0, 2.0});
}

TEST_CASE("cli: simulate is deterministic and writes metadata") {
    const fs::path dir = scratch("cli_sim");
    REQUIRE(kia_cli("simulate --seed 4 --theta0 2.4 --out " + (dir / "a").string()) == 0);
    REQUIRE(kia_cli("simulate --seed 4 --theta0 2.4 --out " + (dir / "b").string()) == 0);
    const std::string a = slurp(dir / "a" / "dataset.bin");
    CHECK(!a.empty());
    CHECK(a == slurp(dir / "b" / "dataset.bin"));
    const json header = json::parse(a.substr(0, a.find('\n')));
    CHECK(header.at("shape") == json::array({4000, 64}));
    CHECK(header.at("provenance").at("theta0").get<double>() == 2.4);

    const json meta = json::parse(slurp(dir / "a" / "metadata.json"));
    CHECK(meta.contains("config"));
    CHECK(meta.contains("seeds"));
    CHECK(meta.contains("format_versions"));
    CHECK(meta.at("config").at("seed") == 4);
    CHECK(meta.at("config") == json::parse(slurp(dir / "a" / "config.json")));
}

TEST_CASE("cli: train, evaluate, report round trip with exit codes") {
    const fs::path dir = scratch("cli_pipeline");
    const std::string run = (dir / "kia").string();
    REQUIRE(kia_cli("simulate --seed 2 --out " + run) == 0);
    REQUIRE(kia_cli("train --seed 2 " + std::string(kQuick) + " --dataset " + run + "/dataset.bin --out " + run) == 0);
    CHECK(fs::exists(dir / "kia" / "checkpoint.bin"));
    const std::string history = slurp(dir / "kia" / "history.csv");
    CHECK(std::count(history.begin(), history.end(), '\n') <= 4);
    REQUIRE(kia_cli("evaluate --seed 2 " + std::string(kQuick) + " --dataset " + run + "/dataset.bin --out " + run) ==
            0);
    const std::string report = slurp(dir / "kia" / "report.csv");
    CHECK(std::count(report.begin(), report.end(), '\n') == 1 + 4 * 60);
    const json summary = json::parse(slurp(dir / "kia" / "summary.json"));
    CHECK(summary.at("model") == "KIA");

    // Re-evaluating the same artifacts reproduces the report byte for byte.
    const std::string again = (dir / "again").string();
    REQUIRE(kia_cli("evaluate --seed 2 " + std::string(kQuick) + " --checkpoint " + run + "/checkpoint.bin --dataset " +
                    run + "/dataset.bin --out " + again) == 0);
    CHECK(slurp(dir / "again" / "report.csv") == report);

    REQUIRE(kia_cli("report " + run + " " + (dir / "missing").string() + " --out " + (dir / "rep").string()) == 0);
    CHECK(fs::exists(dir / "rep" / "comparison.csv"));
    CHECK(kia_cli("report " + (dir / "missing").string() + " --out " + (dir / "rep2").string()) == 2);

    CHECK(kia_cli("train --model KAE --lambda-bwd 0.5 --out " + (dir / "kae").string()) == 2);
    CHECK(kia_cli("train --lr -1 --out " + (dir / "bad").string()) == 2);
    CHECK(kia_cli("evaluate --checkpoint " + (dir / "nope.bin").string() + " --out " + (dir / "x").string()) == 4);
    CHECK(kia_cli("frobnicate") == 2);
    CHECK(kia_cli("simulate --config " + (dir / "absent.json").string()) == 2);
}

TEST_CASE("cli: config file is read and overridden by flags") {
    const fs::path dir = scratch("cli_config");
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"experiment":"pendulum","seed":11,"pendulum":{"theta0":1.1},"noise_std":0.1})";
    }
    REQUIRE(kia_cli("simulate --config " + (dir / "cfg.json").string() + " --seed 12 --out " + (dir / "o").string()) ==
            0);
    const json cfg = json::parse(slurp(dir / "o" / "config.json"));
    CHECK(cfg.at("seed") == 12);
    CHECK(cfg.at("pendulum").at("theta0").get<double>() == 1.1);
    CHECK(cfg.at("noise_std").get<double>() == 0.1);
}

TEST_CASE("cli: ablation writes one row per size") {
    const fs::path dir = scratch("cli_ablation");
    REQUIRE(kia_cli("ablation --seed 1 --sizes 200,300 " + std::string(kQuick) + " --out " + dir.string()) == 0);
    const std::string csv = slurp(dir / "ablation.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(kia_cli("ablation --sizes 500 --out " + (dir / "too_big").string()) == 2);
}
