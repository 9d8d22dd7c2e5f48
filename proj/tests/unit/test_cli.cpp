#include "doctest.h"
#include "oracles.hpp"

#include "avgaudit/cli/commands.hpp"
#include "avgaudit/cli/config.hpp"
#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"
#include "avgaudit/learn/checkpoint.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

using namespace avgaudit;
using namespace avgaudit::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_bin(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(AVGAUDIT_BIN) + " " + args + " >\"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

SyntheticConfig small_synthetic(int count, int size) {
    SyntheticConfig s;
    s.content_count = count;
    s.height = size;
    s.width = size;
    s.defects.base_count = 5;
    s.defects.added_per_class = 8;
    return s;
}

ExperimentConfig small_experiment(const fs::path& out, int count = 20, int size = 24) {
    ExperimentConfig c;
    c.seed = 3;
    c.output = out.string();
    c.synthetic = small_synthetic(count, size);
    c.train.epochs = 2;
    c.train.batch_size = 8;
    c.train.lr = 0.01;
    c.patches.size = 16;
    c.audit.num_runs = 1;
    c.audit.num_sets = 2;
    return c;
}

void write_config(const fs::path& p, const ExperimentConfig& c) { oracle::write_file(p, to_json(c).dump(2)); }

std::size_t count_ext(const fs::path& root, const std::string& ext) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().extension() == ext) ++n;
    return n;
}

} // namespace

// ------------------------------------------------------------------ config

TEST_CASE("config: json round trip") {
    ExperimentConfig c;
    c.seed = 99;
    c.synthetic = small_synthetic(7, 40);
    c.synthetic->options.class_brightness = {0.0, 12.5};
    c.synthetic->dark_frames = 16;
    c.model.variant = "fixed_bank";
    c.model.input_scale = 0.125;
    c.train.schedule = {{3, 0.001}, {6, 0.0003}};
    c.train.optimizer = learn::OptimizerKind::sgd_momentum;
    c.patches = {64, {learn::PatchPosition::ce, learn::PatchPosition::tl}};
    c.fusion = learn::FusionRule::majority;
    c.audit.split = {0.6, 0.2, 0.2};
    c.soft_threshold = 0.1;
    auto j = to_json(c);
    ExperimentConfig back = config_from_json(j);
    CHECK(back == c);
    CHECK(to_json(back) == j);
    CHECK(back.train.schedule == c.train.schedule);
    CHECK(back.patches.positions == c.patches.positions);

    CHECK(config_from_json(json::object()) == ExperimentConfig{});
}

TEST_CASE("config: unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(config_from_json(json{{"sead", 1}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"train", {{"epochz", 3}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"synthetic", {{"defects", {{"bass_count", 1}}}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"seed", "one"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"model", {{"type", "forest"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"audit", {{"fusion", "mean"}}}}), ConfigError);

    oracle::TempDir dir("cfg");
    oracle::write_file(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
}

TEST_CASE("config: referenced paths must exist") {
    ExperimentConfig c;
    c.model.type = ModelType::checkpoint;
    c.model.checkpoint_dir = "/nonexistent/models";
    CHECK_THROWS_AS(validate_config(c), ConfigError);
    ExperimentConfig d;
    d.dataset_root = "/nonexistent/data";
    CHECK_THROWS_AS(validate_config(d), ConfigError);
}

TEST_CASE("config: model variants map to architectures") {
    ModelConfig m;
    m.variant = "residual";
    CHECK(make_arch(m, 1, 2).front_end == learn::FrontEnd::raw);
    CHECK(model_preprocess(m) == learn::Preprocess::median_residual);
    m.variant = "fixed_bank";
    auto a = make_arch(m, 3, 2);
    CHECK(a.front_end == learn::FrontEnd::fixed_bank);
    CHECK_FALSE(a.bank_text.empty());
    m.variant = "constrained";
    CHECK(make_arch(m, 1, 4).num_classes == 4);
    CHECK(model_preprocess(m) == learn::Preprocess::none);
    m.variant = "mystery";
    CHECK_THROWS_AS(make_arch(m, 1, 2), ConfigError);
}

// ---------------------------------------------------------------- generate

TEST_CASE("generate: 2 classes x 400 images") {
    oracle::TempDir dir("gen");
    ExperimentConfig c = small_experiment(dir / "out", 400, 20);
    std::ostringstream log;
    CHECK(cmd_generate(c, false, log) == 0);
    CHECK(count_ext(dir / "out", ".png") == 800);
    CHECK(count_ext(dir / "out" / "signals", ".avgi") == 2);
    CHECK(count_ext(dir / "out" / "defects", ".csv") == 2);
    auto manifest = json::parse(oracle::read_file(dir / "out" / "manifest.json"));
    CHECK(manifest["classes"].size() == 2);
    CHECK(manifest["classes"][1]["count"] == 400);
    CHECK(manifest["classes"][1]["defect_count"] == 13);
    CHECK(config_from_json(manifest["config"]) == c);

    // the tree loads back as the same labelled dataset shape
    int k = 0;
    auto items = load_image_tree(dir / "out" / "images", &k);
    CHECK(k == 2);
    CHECK(items.size() == 800);
}

TEST_CASE("generate: zero defects gives identical classes") {
    oracle::TempDir dir("gen");
    ExperimentConfig c = small_experiment(dir / "out", 6, 16);
    c.synthetic->defects.base_count = 0;
    c.synthetic->defects.added_per_class = 0;
    std::ostringstream log;
    cmd_generate(c, false, log);
    auto a = oracle::snapshot_tree(dir / "out" / "images" / class_dir_name(0, 2));
    auto b = oracle::snapshot_tree(dir / "out" / "images" / class_dir_name(1, 2));
    REQUIRE(a.size() == 6);
    CHECK(a == b);
}

TEST_CASE("generate: same seed, same tree; refuses a non-empty directory") {
    oracle::TempDir dir("gen");
    ExperimentConfig c = small_experiment(dir / "a", 5, 16);
    std::ostringstream log;
    cmd_generate(c, false, log);
    c.output = (dir / "b").string();
    cmd_generate(c, false, log);
    // the manifest embeds the output path; everything else must match
    auto ta = oracle::snapshot_tree(dir / "a"), tb = oracle::snapshot_tree(dir / "b");
    ta.erase("manifest.json");
    tb.erase("manifest.json");
    CHECK(ta == tb);

    CHECK_THROWS_AS(cmd_generate(c, false, log), ConfigError);
    auto before = oracle::snapshot_tree(dir / "b");
    CHECK(cmd_generate(c, true, log) == 0);
    CHECK(oracle::snapshot_tree(dir / "b") == before);

    c.seed = 4;
    c.output = (dir / "c").string();
    cmd_generate(c, false, log);
    auto tc = oracle::snapshot_tree(dir / "c");
    tc.erase("manifest.json");
    CHECK(tc != ta);
}

// ------------------------------------------------------------------- train

TEST_CASE("train: one checkpoint per position plus a curve") {
    oracle::TempDir dir("train");
    ExperimentConfig c = small_experiment(dir / "m");
    c.train.epochs = 1;
    std::ostringstream log;
    CHECK(cmd_train(c, false, {}, log) == 0);
    for (auto p : learn::kAllPositions) CHECK(fs::exists(dir / "m" / ("model_" + std::string(learn::to_string(p)) + ".tnet")));
    std::istringstream curve(oracle::read_file(dir / "m" / "training_curve.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(curve, line)) ++rows;
    CHECK(rows == 5);

    auto clf = load_checkpoint_classifier(dir / "m", learn::FusionRule::score_sum);
    CHECK(clf->num_classes() == 2);
    CHECK(clf->predict(Image(24, 24, 1, 100.0)).size() == 2);

    ExperimentConfig single = small_experiment(dir / "s");
    single.train.epochs = 1;
    single.patches.positions = {learn::PatchPosition::ce};
    cmd_train(single, false, {}, log);
    CHECK(count_ext(dir / "s", ".tnet") == 1);
}

TEST_CASE("train: resumed run equals an uninterrupted one") {
    oracle::TempDir dir("train");
    ExperimentConfig c = small_experiment(dir / "full");
    c.train.epochs = 3;
    c.patches.positions = {learn::PatchPosition::tl, learn::PatchPosition::ce};
    std::ostringstream log;
    cmd_train(c, false, {}, log);

    c.output = (dir / "split").string();
    cmd_train(c, false, TrainOptions{1, false}, log);
    auto partial = learn::load_checkpoint(dir / "split" / "model_ce.tnet");
    REQUIRE(partial.resume.has_value());
    CHECK(partial.resume->history.size() == 1);
    cmd_train(c, false, TrainOptions{std::nullopt, true}, log);

    for (auto name : {"model_tl.tnet", "model_ce.tnet", "training_curve.csv"})
        CHECK(oracle::read_file(dir / "split" / name) == oracle::read_file(dir / "full" / name));
}

// ------------------------------------------------------------------- audit

TEST_CASE("audit: smoke run on 64x64 under a minute") {
    oracle::TempDir dir("audit");
    ExperimentConfig c = small_experiment(dir / "r", 20, 64);
    c.train.epochs = 1;
    c.patches.size = 32;
    c.audit.num_runs = 8;
    c.audit.num_sets = 20;
    write_config(dir / "cfg.json", c);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(run_bin("--config " + (dir / "cfg.json").string() + " audit --runs 1 --sets 1", dir / "log.txt") == 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO(oracle::read_file(dir / "log.txt"));
    CHECK(secs < 60.0);
    for (auto f : {"runs.csv", "summary.csv", "report.json", "findings.txt", "training_curves.csv"})
        CHECK(fs::exists(dir / "r" / f));
    auto rep = json::parse(oracle::read_file(dir / "r" / "report.json"));
    auto snap = config_from_json(rep["reports"][0]["config"]);
    CHECK(snap.audit.num_runs == 1);
    CHECK(snap.audit.num_sets == 1);
    std::istringstream runs(oracle::read_file(dir / "r" / "runs.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(runs, line)) ++rows;
    CHECK(rows == 1);
}

TEST_CASE("audit: checkpoint model, exported averages, config snapshot reloads") {
    oracle::TempDir dir("audit");
    ExperimentConfig c = small_experiment(dir / "m");
    c.train.epochs = 1;
    std::ostringstream log;
    cmd_train(c, false, {}, log);
    c.model.type = ModelType::checkpoint;
    c.model.checkpoint_dir = (dir / "m").string();
    c.output = (dir / "r").string();
    CHECK(cmd_audit(c, false, AuditOptions{std::nullopt, std::nullopt, true, true}, log) == 0);
    // 2 sets x 2 classes x 4 variants
    CHECK(count_ext(dir / "r" / "averages", ".avgi") == 16);
    CHECK(count_ext(dir / "r" / "averages", ".png") == 16);
    auto rep = json::parse(oracle::read_file(dir / "r" / "report.json"));
    CHECK(config_from_json(rep["reports"][0]["config"]) == c);
}

TEST_CASE("audit: missing model path fails before any output") {
    oracle::TempDir dir("audit");
    ExperimentConfig c = small_experiment(dir / "r");
    c.model.type = ModelType::checkpoint;
    c.model.checkpoint_dir = (dir / "nowhere").string();
    write_config(dir / "cfg.json", c);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(run_bin("--config " + (dir / "cfg.json").string() + " audit", dir / "log.txt") == 2);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
    CHECK_FALSE(fs::exists(dir / "r"));
    CHECK(oracle::read_file(dir / "log.txt").find("config error") != std::string::npos);
}

// ----------------------------------------------------------------- inspect

TEST_CASE("inspect: constant raster") {
    oracle::TempDir dir("inspect");
    save_float_raster(Image(8, 8, 1, 5.0), dir / "flat.avgi");
    std::ostringstream out;
    CHECK(cmd_inspect({(dir / "flat.avgi").string()}, {}, out) == 0);
    CHECK(out.str().find("channel 0: min 5 max 5 mean 5") != std::string::npos);
    CHECK(out.str().find("defects above 10: 0") != std::string::npos);
}

TEST_CASE("inspect: planted defect and an inter-class diff") {
    oracle::TempDir dir("inspect");
    Image a(32, 32, 1, 60.0);
    a.at(5, 20) += 40.0;
    Image b = a;
    b.at(17, 9) += 35.0;
    save_float_raster(a, dir / "old.avgi");
    save_float_raster(b, dir / "new.avgi");

    std::ostringstream one;
    cmd_inspect({(dir / "old.avgi").string()}, {}, one);
    CHECK(one.str().find("defects above 10: 1") != std::string::npos);
    CHECK(one.str().find("(5, 20, 0) 40") != std::string::npos);

    std::ostringstream diff;
    InspectOptions o;
    o.diff = true;
    o.csv_out = (dir / "hits.csv").string();
    cmd_inspect({(dir / "old.avgi").string(), (dir / "new.avgi").string()}, o, diff);
    CHECK(diff.str().find("relative to " + (dir / "old.avgi").string() + ": 1") != std::string::npos);
    CHECK(diff.str().find("(17, 9, 0) 35") != std::string::npos);
    CHECK(diff.str().find("(5, 20, 0)") == std::string::npos);
    auto csv = oracle::read_file(dir / "hits.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    CHECK_THROWS_AS(cmd_inspect({(dir / "old.avgi").string()}, o, diff), ConfigError);
}

// -------------------------------------------------------------- exit codes

TEST_CASE("exit codes of the binary") {
    oracle::TempDir dir("exit");
    const auto log = dir / "log.txt";

    ExperimentConfig c = small_experiment(dir / "m");
    c.train.epochs = 0;
    write_config(dir / "epochs0.json", c);
    CHECK(run_bin("--config " + (dir / "epochs0.json").string() + " train", log) == 2);

    oracle::write_file(dir / "unknown.json", R"({"seed": 1, "colour": "red"})");
    CHECK(run_bin("--config " + (dir / "unknown.json").string() + " generate", log) == 2);
    CHECK(run_bin("--bogus-flag", log) == 2);

    // a class directory holding a file that is not a PNG
    fs::create_directories(dir / "tree" / "a");
    fs::create_directories(dir / "tree" / "b");
    oracle::write_file(dir / "tree" / "a" / "0.png", "definitely not a png");
    oracle::write_file(dir / "tree" / "b" / "0.png", "nor this");
    ExperimentConfig d;
    d.dataset_root = (dir / "tree").string();
    d.output = (dir / "d").string();
    write_config(dir / "data.json", d);
    CHECK(run_bin("--config " + (dir / "data.json").string() + " train", log) == 3);

    ExperimentConfig e = small_experiment(dir / "e", 10, 16);
    e.patches.size = 16;
    e.model.type = ModelType::external;
    e.model.command = oracle::write_script(dir / "fail.sh", "echo broken >&2\nexit 1\n").string();
    write_config(dir / "ext.json", e);
    CHECK(run_bin("--config " + (dir / "ext.json").string() + " audit", log) == 4);
    CHECK(oracle::read_file(log).find("broken") != std::string::npos);
    // the partial report carries the failure marker
    auto rep = json::parse(oracle::read_file(dir / "e" / "report.json"));
    CHECK(rep["reports"][0].contains("failure"));
    CHECK(rep["reports"][0]["complete"] == false);

    ExperimentConfig n = small_experiment(dir / "n", 10, 16);
    n.train.optimizer = learn::OptimizerKind::sgd_momentum;
    n.train.lr = 1e250;
    n.model.variant = "raw";
    write_config(dir / "nan.json", n);
    CHECK(run_bin("--config " + (dir / "nan.json").string() + " train", log) == 5);

    // --out overrides the config, --force allows reuse
    CHECK(run_bin("--config " + (dir / "ext.json").string() + " --out " + (dir / "g").string() + " generate", log) == 0);
    CHECK(run_bin("--config " + (dir / "ext.json").string() + " --out " + (dir / "g").string() + " generate", log) == 2);
    CHECK(run_bin("--config " + (dir / "ext.json").string() + " --out " + (dir / "g").string() + " --force generate", log) == 0);
}
