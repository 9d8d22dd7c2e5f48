#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"
#include "avgaudit/core/parallel.hpp"
#include "avgaudit/filters/median.hpp"
#include "avgaudit/learn/checkpoint.hpp"
#include "avgaudit/learn/classifier.hpp"
#include "avgaudit/learn/external_classifier.hpp"
#include "avgaudit/learn/optimizer.hpp"
#include "avgaudit/learn/patches.hpp"
#include "avgaudit/learn/tinynet.hpp"
#include "avgaudit/learn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace avgaudit;
using namespace avgaudit::learn;

// ---------------------------------------------------------------- patches

TEST_CASE("five crops: degenerate full-size patch") {
    Image img = oracle::random_image(256, 256, 1, 1);
    auto crops = extract_five_crops(img, PatchSpec{});
    REQUIRE(crops.size() == 5);
    for (const auto& [pos, c] : crops) CHECK(c == img);
}

TEST_CASE("five crops: anchors on 512x512") {
    CHECK(patch_anchor(PatchPosition::tl, 512, 512, 256) == std::pair{0, 0});
    CHECK(patch_anchor(PatchPosition::tr, 512, 512, 256) == std::pair{0, 256});
    CHECK(patch_anchor(PatchPosition::bl, 512, 512, 256) == std::pair{256, 0});
    CHECK(patch_anchor(PatchPosition::br, 512, 512, 256) == std::pair{256, 256});
    CHECK(patch_anchor(PatchPosition::ce, 512, 512, 256) == std::pair{128, 128});
    CHECK(patch_anchor(PatchPosition::ce, 11, 20, 4) == std::pair{3, 8});

    Image img(24, 24, 1);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) img.at(y, x) = y * 24 + x;
    auto crops = extract_five_crops(img, PatchSpec{10, {kAllPositions.begin(), kAllPositions.end()}});
    CHECK(crops.at(PatchPosition::tr).at(0, 0) == 14);
    CHECK(crops.at(PatchPosition::ce).at(0, 0) == 7 * 24 + 7);
    // tl and br share no source pixel
    double tl_max = *std::max_element(crops.at(PatchPosition::tl).pixels().begin(), crops.at(PatchPosition::tl).pixels().end());
    CHECK(tl_max < crops.at(PatchPosition::br).at(0, 0));
    CHECK_THROWS_AS(extract_patch(img, PatchPosition::tl, 25), DataError);
}

TEST_CASE("patch spec validation and names") {
    CHECK_THROWS_AS((PatchSpec{0, {PatchPosition::ce}}.validate()), ConfigError);
    CHECK_THROWS_AS((PatchSpec{8, {}}.validate()), ConfigError);
    CHECK_THROWS_AS((PatchSpec{8, {PatchPosition::ce, PatchPosition::ce}}.validate()), ConfigError);
    for (auto p : kAllPositions) CHECK(parse_position(to_string(p)) == p);
}

TEST_CASE("blocks: 3000x4000 gives a 6x8 grid") {
    Image img(3000, 4000, 1);
    for (int y = 0; y < 3000; ++y)
        for (int x = 0; x < 4000; x += 500) img.at(y, x) = (y / 500) * 8 + x / 500;
    auto blocks = extract_blocks(img);
    REQUIRE(blocks.size() == 48);
    for (int b = 0; b < 48; ++b) {
        CHECK(blocks[b].height() == 500);
        CHECK(blocks[b].at(0, 0) == b);
        CHECK(blocks[b].at(499, 0) == b);
    }
}

TEST_CASE("blocks: single row strip and too small") {
    Image strip(500, 500 * 48, 1);
    for (int x = 0; x < strip.width(); x += 500) strip.at(0, x) = x / 500;
    auto blocks = extract_blocks(strip);
    REQUIRE(blocks.size() == 48);
    for (int b = 0; b < 48; ++b) CHECK(blocks[b].at(0, 0) == b);
    CHECK_THROWS_AS(extract_blocks(Image(1000, 1000, 1)), DataError);
}

// ----------------------------------------------------------------- fusion

TEST_CASE("fusion rules") {
    std::vector<std::vector<double>> one{{0.2, 0.7, 0.1}};
    CHECK(fuse_predictions(one, FusionRule::score_sum) == 1);
    CHECK(fuse_predictions(one, FusionRule::majority) == 1);

    std::vector<std::vector<double>> votes{{1, 0}, {1, 0}, {0, 1}, {0, 1}, {0, 1}};
    CHECK(fuse_predictions(votes, FusionRule::majority) == 1);
    CHECK(fuse_scores(votes, FusionRule::majority) == std::vector<double>{2, 3});

    std::vector<std::vector<double>> s{{0.6, 0.4}, {0.1, 0.9}};
    auto sum = fuse_scores(s, FusionRule::score_sum);
    CHECK(sum[0] == doctest::Approx(0.7));
    CHECK(sum[1] == doctest::Approx(1.3));
    CHECK(fuse_predictions(s, FusionRule::score_sum) == 1);

    // ties to the lowest class
    std::vector<std::vector<double>> tie{{0.5, 0.5}};
    CHECK(fuse_predictions(tie, FusionRule::score_sum) == 0);
    std::vector<std::vector<double>> vtie{{0, 1}, {1, 0}};
    CHECK(fuse_predictions(vtie, FusionRule::majority) == 0);

    CHECK_THROWS_AS(fuse_scores(std::vector<std::vector<double>>{}, FusionRule::score_sum), DataError);
    CHECK_THROWS_AS(fuse_scores(std::vector<std::vector<double>>{{1, 2}, {1}}, FusionRule::score_sum), DataError);
}

TEST_CASE("score_sum is invariant to input order") {
    std::mt19937 gen(3);
    std::vector<std::vector<double>> s(7, std::vector<double>(4));
    for (auto& v : s)
        for (auto& x : v) x = static_cast<double>(gen() % 1000) / 1000.0;
    int want = fuse_predictions(s, FusionRule::score_sum);
    for (int t = 0; t < 20; ++t) {
        std::shuffle(s.begin(), s.end(), gen);
        CHECK(fuse_predictions(s, FusionRule::score_sum) == want);
    }
}

// -------------------------------------------------------------- optimizers

TEST_CASE("adamax: zero gradient leaves parameters alone") {
    std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
    AdamaxState st{{0, 0}, {0, 0}, 0};
    adamax_step(p, g, st, 0.01);
    CHECK(p == std::vector<double>{1.0, -2.0});
}

TEST_CASE("adamax: first step with unit gradient") {
    std::vector<double> p{0.0}, g{1.0};
    AdamaxState st{{0}, {0}, 0};
    adamax_step(p, g, st, 0.001);
    // m = 0.1, bias correction 1/(1-0.9), u = 1
    CHECK(p[0] == doctest::Approx(-0.001 * (0.1 / 0.1) / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(st.step == 1);
}

TEST_CASE("adamax: two halves equal one run") {
    std::mt19937 gen(8);
    std::vector<std::vector<double>> grads(10, std::vector<double>(3));
    for (auto& g : grads)
        for (auto& x : g) x = static_cast<double>(gen() % 200) / 100.0 - 1.0;
    std::vector<double> full{0.1, 0.2, 0.3};
    AdamaxState sf{{0, 0, 0}, {0, 0, 0}, 0};
    for (const auto& g : grads) adamax_step(full, g, sf, 0.01);

    std::vector<double> half{0.1, 0.2, 0.3};
    AdamaxState s1{{0, 0, 0}, {0, 0, 0}, 0};
    for (int i = 0; i < 5; ++i) adamax_step(half, grads[i], s1, 0.01);
    AdamaxState saved = s1;   // as if restored from disk
    std::vector<double> resumed = half;
    for (int i = 5; i < 10; ++i) adamax_step(resumed, grads[i], saved, 0.01);
    CHECK(resumed == full);
    CHECK(saved == sf);
}

TEST_CASE("sgd momentum: plain, geometric series, carry") {
    std::vector<double> p{1.0}, g{0.5};
    MomentumState st{{0.0}};
    sgd_momentum_step(p, g, st, 0.1, 0.0);
    CHECK(p[0] == doctest::Approx(0.95));

    const double m = 0.95, gv = 2.0;
    MomentumState s2{{0.0}};
    std::vector<double> q{0.0}, gg{gv};
    for (int t = 1; t <= 12; ++t) {
        sgd_momentum_step(q, gg, s2, 0.001, m);
        CHECK(s2.velocity[0] == doctest::Approx(gv * (1 - std::pow(m, t)) / (1 - m)).epsilon(1e-12));
    }

    MomentumState s3{{4.0}};
    std::vector<double> r{1.0}, zero{0.0};
    sgd_momentum_step(r, zero, s3, 0.1, 0.9);
    CHECK(r[0] == doctest::Approx(1.0 - 0.1 * 0.9 * 4.0));
}

// ----------------------------------------------------------------- TinyNet

TEST_CASE("softmax cross-entropy of uniform scores is ln K") {
    for (int k : {2, 3, 5, 10}) {
        std::vector<double> logits(k, 0.0);
        CHECK(softmax_cross_entropy(logits, 0) == std::log(static_cast<double>(k)));
        std::vector<double> shifted(k, 7.25);
        CHECK(softmax_cross_entropy(shifted, k - 1) == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-15));
    }
    auto p = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::isfinite(p[1]));
    CHECK(p[0] == 1.0);
}

void check_gradients(FrontEnd fe, int channels, int size) {
    for (const auto& [name, rel] : gradcheck::relative_errors(fe, channels, size)) {
        INFO(to_string(fe), " ", name, " rel ", rel);
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("gradients: raw front end") { check_gradients(FrontEnd::raw, 1, 9); }
TEST_CASE("gradients: constrained front end") {
    check_gradients(FrontEnd::constrained, 1, 12);
    check_gradients(FrontEnd::constrained, 3, 11);
}
TEST_CASE("gradients: fixed bank front end") { check_gradients(FrontEnd::fixed_bank, 3, 10); }

TEST_CASE("tinynet: layout and constraints at init") {
    TinyNetArch a;
    Rng rng(3);
    TinyNet net(a, rng);
    std::vector<std::string> names;
    for (const auto& b : net.blocks()) names.push_back(b.name);
    CHECK(names == std::vector<std::string>{"front.weight", "conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias",
                                            "fc.weight", "fc.bias"});
    CHECK(net.block("front.weight").shape == std::vector<int>{3, 1, 5, 5});
    CHECK(net.constraint_violation() <= 1e-12);
    CHECK(net.block("conv2.bias").count == 16);

    // Glorot bound for conv1: fan_in 3*9, fan_out 8*9
    const double bound = std::sqrt(6.0 / (27 + 72));
    const auto& c1 = net.block("conv1.weight");
    for (std::size_t i = 0; i < c1.count; ++i) CHECK(std::abs(net.parameters()[c1.offset + i]) <= bound);
    for (std::size_t i = 0; i < net.block("fc.bias").count; ++i) CHECK(net.parameters()[net.block("fc.bias").offset + i] == 0.0);

    CHECK(a.min_input_size() == 9);
    CHECK_THROWS_AS(net.scores(Image(8, 8, 1)), DataError);
    CHECK_THROWS_AS(net.scores(Image(16, 16, 3)), DataError);
}

TEST_CASE("tinynet: zero-sum front ignores constant offsets") {
    Rng rng(5);
    TinyNet net(TinyNetArch{}, rng);
    Image a = oracle::random_image(16, 16, 1, 1);
    Image b = a;
    for (auto& v : b.pixels()) v += 40.0;
    auto la = net.logits(a), lb = net.logits(b);
    for (std::size_t k = 0; k < la.size(); ++k) CHECK(la[k] == doctest::Approx(lb[k]).epsilon(1e-9));
    auto c1 = net.logits(Image(16, 16, 1, 10.0)), c2 = net.logits(Image(16, 16, 1, 200.0));
    for (std::size_t k = 0; k < c1.size(); ++k) CHECK(std::abs(c1[k] - c2[k]) < 1e-9);
}

TEST_CASE("tinynet: parameters constructor") {
    Rng rng(1);
    TinyNet net(TinyNetArch{}, rng);
    std::vector<double> p(net.parameters().begin(), net.parameters().end());
    TinyNet copy(TinyNetArch{}, p);
    Image x = oracle::random_image(12, 12, 1, 3);
    CHECK(copy.scores(x) == net.scores(x));
    p.pop_back();
    CHECK_THROWS_AS(TinyNet(TinyNetArch{}, p), FormatError);
}

TEST_CASE("tinynet: arch validation") {
    TinyNetArch a;
    a.num_classes = 1;
    CHECK_THROWS_AS(a.validate(), ConfigError);
    TinyNetArch b;
    b.front_size = 4;
    CHECK_THROWS_AS(b.validate(), ConfigError);
    TinyNetArch c;
    c.front_end = FrontEnd::fixed_bank;
    CHECK_THROWS(c.validate());
    for (auto f : {FrontEnd::raw, FrontEnd::constrained, FrontEnd::fixed_bank}) CHECK(parse_front_end(to_string(f)) == f);
}

// ---------------------------------------------------------------- training

namespace {

LabeledDataset flat_classes(int per_class, int size, double lo, double hi, std::uint64_t seed) {
    std::vector<LabeledImage> items;
    Rng rng(seed);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < per_class; ++i) {
            double base = k == 0 ? lo : hi;
            items.push_back({std::to_string(k) + "/" + std::to_string(i),
                             std::make_shared<const Image>(size, size, 1, base + rng.uniform(-10, 10)), k});
        }
    Rng split(seed + 1);
    return split_dataset(items, 2, {0.8, 0.2, 0.0}, split);
}

// Sparse bright pixels: class 1 has more of them. Needs a residual detector.
LabeledDataset spot_classes(int per_class, int size, std::uint64_t seed) {
    std::vector<LabeledImage> items;
    Rng rng(seed);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < per_class; ++i) {
            Image img(size, size, 1, 0.0);
            const double base = rng.uniform(60, 180);
            for (auto& v : img.pixels()) v = base + rng.normal(0, 2);
            for (int s = 0; s < (k == 0 ? 1 : 8); ++s)
                img.at(static_cast<int>(rng.uniform_int(size)), static_cast<int>(rng.uniform_int(size))) += 60.0;
            items.push_back({std::to_string(k) + "/" + std::to_string(i), std::make_shared<const Image>(img), k});
        }
    Rng split(seed + 1);
    return split_dataset(items, 2, {0.8, 0.2, 0.0}, split);
}

} // namespace

TEST_CASE("train config validation") {
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.lr = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.optimizer = OptimizerKind::sgd_momentum;
    c.momentum = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.schedule = {{3, 0.1}, {2, 0.01}};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.schedule = {{2, 0.1}, {5, 0.01}};
    CHECK_NOTHROW(c.validate());
    CHECK(c.lr_at_epoch(0) == c.lr);
    CHECK(c.lr_at_epoch(2) == 0.1);
    CHECK(c.lr_at_epoch(9) == 0.01);
    CHECK(parse_optimizer("sgd_momentum") == OptimizerKind::sgd_momentum);
}

TEST_CASE("training: flat-colour classes separate within 5 epochs") {
    auto ds = flat_classes(40, 8, 60, 180, 1);
    TinyNetArch arch;
    arch.front_end = FrontEnd::raw;
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.seed = 3;
    auto res = train_tinynet(ds, cfg, arch, PatchPosition::ce, 8);
    REQUIRE(res.history.size() == 5);
    CHECK(res.history.back().validation_accuracy == 1.0);
    for (const auto& e : res.history) CHECK(e.lr == 0.01);
}

TEST_CASE("training: zero learning rate freezes the model") {
    auto ds = flat_classes(10, 12, 60, 180, 2);
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.epochs = 2;
    cfg.seed = 5;
    TinyNetArch arch;
    Rng init(derive_seed(cfg.seed, "init"));
    TinyNet initial(arch, init);
    auto train = make_patch_set(ds, Split::train, PatchPosition::ce, 12, Preprocess::none);
    auto val = make_patch_set(ds, Split::validation, PatchPosition::ce, 12, Preprocess::none);
    TrainSession s(arch, cfg, train, val);
    s.run();
    CHECK(std::equal(s.net().parameters().begin(), s.net().parameters().end(), initial.parameters().begin()));
    CHECK(s.history()[1].validation_accuracy == accuracy(initial, val));
}

TEST_CASE("training: constraint holds after every step") {
    auto ds = spot_classes(25, 12, 4);
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.seed = 9;
    TinyNetArch arch;
    TrainSession s(arch, cfg, make_patch_set(ds, Split::train, PatchPosition::ce, 12, Preprocess::none),
                   make_patch_set(ds, Split::validation, PatchPosition::ce, 12, Preprocess::none));
    double worst = 0;
    std::int64_t steps = 0;
    s.on_step = [&](const TinyNet& n, std::int64_t step) {
        worst = std::max(worst, n.constraint_violation());
        steps = step;
    };
    s.run();
    CHECK(steps == 50);
    CHECK(worst <= 1e-12);
}

TEST_CASE("training: bit-identical for 1 and 4 workers") {
    auto ds = spot_classes(12, 12, 6);
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.epochs = 3;
    cfg.batch_size = 5;
    cfg.seed = 2;
    auto run = [&](int threads) {
        set_num_threads(threads);
        auto r = train_tinynet(ds, cfg, TinyNetArch{}, PatchPosition::ce, 12);
        return std::pair{std::vector<double>(r.net.parameters().begin(), r.net.parameters().end()), r.history};
    };
    auto a = run(1);
    auto b = run(4);
    set_num_threads(1);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("training: resumed session equals an uninterrupted one") {
    auto ds = spot_classes(12, 12, 7);
    for (auto kind : {OptimizerKind::adamax, OptimizerKind::sgd_momentum}) {
        TrainConfig cfg;
        cfg.optimizer = kind;
        cfg.lr = 0.01;
        cfg.epochs = 4;
        cfg.batch_size = 4;
        cfg.seed = 11;
        cfg.schedule = {{2, 0.005}};
        auto train = make_patch_set(ds, Split::train, PatchPosition::ce, 12, Preprocess::none);
        auto val = make_patch_set(ds, Split::validation, PatchPosition::ce, 12, Preprocess::none);
        TrainSession full(TinyNetArch{}, cfg, train, val);
        full.run();

        TrainSession first(TinyNetArch{}, cfg, train, val);
        first.run(2);
        CHECK(first.epochs_done() == 2);
        TrainSession second(first.net(), first.optimizer(), first.history(), cfg, train, val);
        second.run();
        CHECK(std::equal(second.net().parameters().begin(), second.net().parameters().end(),
                         full.net().parameters().begin(), full.net().parameters().end()));
        CHECK(second.history() == full.history());
    }
}

TEST_CASE("training: divergence is reported") {
    auto ds = flat_classes(6, 10, 60, 180, 3);
    TinyNetArch arch;
    arch.front_end = FrontEnd::raw;
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd_momentum;
    cfg.lr = 1e250;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    CHECK_THROWS_AS(train_tinynet(ds, cfg, arch, PatchPosition::ce, 10), NumericError);
}

// -------------------------------------------------------------- checkpoint

TEST_CASE("checkpoint: round trip, f32 blocks and f64 resume state") {
    oracle::TempDir dir("ckpt");
    TinyNetArch arch;
    arch.front_end = FrontEnd::fixed_bank;
    arch.bank_text = gradcheck::kSmallBank;
    arch.in_channels = 3;
    Rng rng(4);
    TinyNet net(arch, rng);
    std::vector<double> exact(net.parameters().begin(), net.parameters().end());

    Checkpoint ck{net, 77, PatchPosition::br, 64, Preprocess::median_residual, std::nullopt};
    OptimizerState opt;
    opt.adamax = {std::vector<double>(exact.size(), 0.25), std::vector<double>(exact.size(), 0.5), 9};
    ck.resume = ResumeState{exact, opt, {{0, 0.001, 0.6, 0.5, 0.5}}};
    save_checkpoint(dir / "m.tnet", ck);
    CHECK(oracle::read_file(dir / "m.tnet").substr(0, 4) == "TNET");

    Checkpoint back = load_checkpoint(dir / "m.tnet");
    CHECK(back.net.arch() == arch);
    CHECK(back.seed == 77);
    CHECK(back.position == PatchPosition::br);
    CHECK(back.patch_size == 64);
    CHECK(back.preprocess == Preprocess::median_residual);
    for (std::size_t i = 0; i < exact.size(); ++i)
        CHECK(back.net.parameters()[i] == static_cast<double>(static_cast<float>(exact[i])));
    REQUIRE(back.resume.has_value());
    CHECK(back.resume->parameters == exact);
    CHECK(back.resume->optimizer == opt);
    CHECK(back.resume->history == ck.resume->history);

    Checkpoint plain{net, 1, PatchPosition::ce, 32, Preprocess::none, std::nullopt};
    save_checkpoint(dir / "p.tnet", plain);
    CHECK_FALSE(load_checkpoint(dir / "p.tnet").resume.has_value());
}

TEST_CASE("checkpoint: corrupt files") {
    oracle::TempDir dir("ckpt");
    Rng rng(1);
    save_checkpoint(dir / "m.tnet", Checkpoint{TinyNet(TinyNetArch{}, rng), 1, PatchPosition::ce, 32, Preprocess::none, {}});
    std::string bytes = oracle::read_file(dir / "m.tnet");
    std::string bad = bytes;
    bad[1] = 'X';
    oracle::write_file(dir / "bad.tnet", bad);
    oracle::write_file(dir / "short.tnet", bytes.substr(0, bytes.size() - 10));
    std::string ver = bytes;
    ver[4] = 9;
    oracle::write_file(dir / "ver.tnet", ver);
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.tnet"), FormatError);
    CHECK_THROWS_AS(load_checkpoint(dir / "short.tnet"), FormatError);
    CHECK_THROWS_AS(load_checkpoint(dir / "ver.tnet"), FormatError);
}

// -------------------------------------------------------------- classifiers

namespace {

// Scores depend only on the image mean.
class MeanThreshold : public Classifier {
public:
    explicit MeanThreshold(double t) : t_(t) {}
    std::string name() const override { return "mean"; }
    int num_classes() const override { return 2; }
    std::vector<double> predict(const Image& img) const override {
        double m = std::accumulate(img.pixels().begin(), img.pixels().end(), 0.0) / static_cast<double>(img.size());
        return m > t_ ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
    }

private:
    double t_;
};

} // namespace

TEST_CASE("block majority classifier") {
    Image img(1000, 1500, 1, 0.0);
    // 4 of 6 blocks bright
    for (int y = 0; y < 1000; ++y)
        for (int x = 0; x < 1000; ++x) img.at(y, x) = 100.0;
    BlockMajorityClassifier clf(std::make_shared<MeanThreshold>(50.0), 500, 6);
    CHECK(clf.predict(img) == std::vector<double>{2.0, 4.0});
    CHECK(clf.classify(img) == 1);
    BlockMajorityClassifier too_many(std::make_shared<MeanThreshold>(50.0), 500, 48);
    CHECK_THROWS_AS(too_many.predict(img), DataError);
}

TEST_CASE("patch ensemble crops and fuses") {
    Rng rng(2);
    std::map<PatchPosition, TinyNet> models;
    for (auto p : {PatchPosition::tl, PatchPosition::br}) models.emplace(p, TinyNet(TinyNetArch{}, rng));
    PatchEnsembleClassifier clf(models, 12, FusionRule::score_sum, Preprocess::none);
    Image img = oracle::random_image(20, 20, 1, 5);
    auto a = models.at(PatchPosition::tl).scores(extract_patch(img, PatchPosition::tl, 12));
    auto b = models.at(PatchPosition::br).scores(extract_patch(img, PatchPosition::br, 12));
    auto fused = clf.predict(img);
    CHECK(fused[0] == doctest::Approx(a[0] + b[0]));
    CHECK(fused[1] == doctest::Approx(a[1] + b[1]));
    std::vector<Image> batch{img, oracle::random_image(20, 20, 1, 6)};
    auto bs = clf.predict_batch(batch);
    CHECK(bs[0] == fused);
    CHECK(apply_preprocess(img, Preprocess::median_residual) == filters::residual_transform(img));
    CHECK(apply_preprocess(img, Preprocess::none) == img);
}

TEST_CASE("adapter: scores CSV parsing") {
    auto rows = parse_scores_csv("index,score_0,score_1\n0,0.25,0.75\n1,1,0\n", 2, 2);
    CHECK(rows == std::vector<std::vector<double>>{{0.25, 0.75}, {1, 0}});
    CHECK_THROWS_AS(parse_scores_csv("index,score_0,score_1\n0,0.25,0.75\n", 2, 2), AdapterError);
    CHECK_THROWS_AS(parse_scores_csv("index,score_0\n0,0.25\n", 1, 2), AdapterError);
    CHECK_THROWS_AS(parse_scores_csv("index,score_0,score_1\n1,0.25,0.75\n", 1, 2), AdapterError);
    CHECK_THROWS_AS(parse_scores_csv("index,score_0,score_1\n0,abc,0.75\n", 1, 2), AdapterError);
    CHECK_THROWS_AS(parse_scores_csv("index,score_0,score_1\n0,nan,0.75\n", 1, 2), AdapterError);
    CHECK(split_command("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
}

namespace {

// Writes a uniform-score adapter that also records the manifest it saw.
std::string uniform_adapter(const oracle::TempDir& dir) {
    return oracle::write_script(dir / "uniform.sh",
                                "while [ $# -gt 0 ]; do case $1 in --manifest) m=$2; shift;; --out) o=$2; shift;; esac; shift; done\n"
                                "cp \"$m\" \"" + (dir / "seen.txt").string() + "\"\n"
                                "echo index,score_0,score_1 > \"$o\"\n"
                                "i=0; while read -r line; do echo $i,0.5,0.5 >> \"$o\"; i=$((i+1)); done < \"$m\"\n")
        .string();
}

} // namespace

TEST_CASE("adapter: uniform scores tie-break to class 0") {
    oracle::TempDir dir("adapter");
    ExternalClassifier clf({uniform_adapter(dir)}, 2, "uniform", Preprocess::none, 3);
    std::vector<Image> imgs;
    for (unsigned s = 0; s < 7; ++s) imgs.push_back(oracle::random_image(6, 6, 1, s));
    auto scores = clf.predict_batch(imgs);
    REQUIRE(scores.size() == 7);
    for (const auto& s : scores) CHECK(s == std::vector<double>{0.5, 0.5});
    CHECK(clf.classify(imgs[0]) == 0);
    // the last batch (max_batch 3) held one image
    std::string seen = oracle::read_file(dir / "seen.txt");
    CHECK(std::count(seen.begin(), seen.end(), '\n') == 1);
}

TEST_CASE("adapter: failures surface as AdapterError") {
    oracle::TempDir dir("adapter");
    auto fail = oracle::write_script(dir / "fail.sh", "echo 'model exploded' >&2\nexit 3\n");
    ExternalClassifier f({fail.string()}, 2);
    try {
        f.predict(Image(4, 4, 1));
        FAIL("expected AdapterError");
    } catch (const AdapterError& e) {
        CHECK(e.captured_stderr().find("model exploded") != std::string::npos);
    }

    auto killed = oracle::write_script(dir / "kill.sh", "kill -9 $$\n");
    CHECK_THROWS_AS(ExternalClassifier({killed.string()}, 2).predict(Image(4, 4, 1)), AdapterError);

    auto bad = oracle::write_script(dir / "bad.sh",
                                    "while [ $# -gt 0 ]; do case $1 in --out) o=$2; shift;; esac; shift; done\n"
                                    "echo index,score_0 > \"$o\"\necho 0,1 >> \"$o\"\n");
    CHECK_THROWS_AS(ExternalClassifier({bad.string()}, 2).predict(Image(4, 4, 1)), AdapterError);

    auto silent = oracle::write_script(dir / "silent.sh", "exit 0\n");
    CHECK_THROWS_AS(ExternalClassifier({silent.string()}, 2).predict(Image(4, 4, 1)), AdapterError);

    CHECK_THROWS_AS(ExternalClassifier({(dir / "nope").string()}, 2).predict(Image(4, 4, 1)), AdapterError);
}

TEST_CASE("adapter: wrapping a checkpoint matches in-process scores") {
    oracle::TempDir dir("adapter");
    std::filesystem::create_directories(dir / "model");
    Rng rng(12);
    TinyNetArch arch;
    for (auto p : {PatchPosition::tl, PatchPosition::ce})
        save_checkpoint(dir / "model" / ("model_" + std::string(to_string(p)) + ".tnet"),
                        Checkpoint{TinyNet(arch, rng), 1, p, 16, Preprocess::none, {}});

    std::map<PatchPosition, TinyNet> models;
    for (auto p : {PatchPosition::tl, PatchPosition::ce})
        models.emplace(p, load_checkpoint(dir / "model" / ("model_" + std::string(to_string(p)) + ".tnet")).net);
    PatchEnsembleClassifier local(models, 16, FusionRule::score_sum, Preprocess::none);

    ExternalClassifier remote(split_command(std::string(AVGAUDIT_BIN) + " predict --model " + (dir / "model").string()), 2);
    std::vector<Image> imgs;
    for (unsigned s = 0; s < 5; ++s) {
        Image im = oracle::random_image(24, 24, 1, 40 + s);
        for (auto& v : im.pixels()) v = static_cast<float>(v);   // AVGI carries f32
        imgs.push_back(im);
    }
    auto r = remote.predict_batch(imgs);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        auto l = local.predict(imgs[i]);
        for (int k = 0; k < 2; ++k) CHECK(std::abs(r[i][k] - l[k]) <= 1e-6);
    }
}
