#include "avgaudit/audit/audit.hpp"

#include "avgaudit/audit/metrics.hpp"
#include "avgaudit/avg/sampling.hpp"
#include "avgaudit/core/error.hpp"
#include "avgaudit/core/parallel.hpp"
#include "avgaudit/learn/patches.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace avgaudit::audit {

using avg::AverageVariant;

void AuditConfig::validate() const {
    if (num_runs < 1) throw ConfigError("num_runs must be at least 1");
    if (num_sets < 1) throw ConfigError("num_sets must be at least 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("averaging fraction must lie in (0, 1]");
}

TinyNetProvider::TinyNetProvider(learn::TinyNetArch arch, learn::TrainConfig train, learn::PatchSpec patches,
                                 learn::FusionRule fusion, learn::Preprocess preprocess)
    : arch_(std::move(arch)), train_(std::move(train)), patches_(std::move(patches)), fusion_(fusion),
      preprocess_(preprocess) {
    arch_.validate();
    train_.validate();
    patches_.validate();
}

std::shared_ptr<const learn::Classifier> TinyNetProvider::obtain(const LabeledDataset& dataset, int run_index,
                                                                 std::uint64_t run_seed) {
    std::map<learn::PatchPosition, learn::TinyNet> models;
    for (auto pos : patches_.positions) {
        auto cfg = train_;
        cfg.seed = derive_seed(run_seed, "train", static_cast<std::uint64_t>(pos));
        // The dataset arrives preprocessed; training must not apply it twice.
        auto result = learn::train_tinynet(dataset, cfg, arch_, pos, patches_.size, learn::Preprocess::none);
        curves_.push_back(Curve{run_index, pos, result.history});
        models.emplace(pos, std::move(result.net));
    }
    return std::make_shared<learn::PatchEnsembleClassifier>(std::move(models), patches_.size, fusion_, preprocess_);
}

VariantAccuracy evaluate_on_average_images(const learn::Classifier& classifier, std::span<const VariantSample> samples) {
    std::vector<Image> images;
    images.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.true_class < 0 || s.true_class >= classifier.num_classes())
            throw DataError("average image label outside the classifier's class range");
        images.push_back(s.image);
    }
    const auto scores = classifier.predict_batch(images);
    if (scores.size() != samples.size()) throw DataError("classifier returned the wrong number of score vectors");

    VariantAccuracy out;
    std::array<std::size_t, 4> hits{};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (scores[i].size() != static_cast<std::size_t>(classifier.num_classes()))
            throw DataError("classifier returned a score vector of the wrong length");
        const auto v = static_cast<std::size_t>(samples[i].variant);
        ++out.counts[v];
        if (learn::argmax(scores[i]) == samples[i].true_class) ++hits[v];
    }
    for (std::size_t v = 0; v < 4; ++v)
        out.accuracy[v] = out.counts[v] ? static_cast<double>(hits[v]) / static_cast<double>(out.counts[v]) : 0.0;
    return out;
}

double test_accuracy(const learn::Classifier& classifier, const LabeledDataset& dataset) {
    const auto idx = dataset.indices_of(Split::test);
    if (idx.empty()) throw DataError("test split is empty");
    std::vector<Image> images;
    images.reserve(idx.size());
    for (auto i : idx) images.push_back(*dataset.items()[i].image);
    const auto scores = classifier.predict_batch(images);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (learn::argmax(scores[i]) == dataset.items()[idx[i]].label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(idx.size());
}

void finalize_report(AuditReport& report) {
    report.delta.reset();
    report.delta_gen = {};
    report.mean_acc_s = 0.0;
    if (report.runs.empty()) return;
    std::vector<double> acc_s;
    for (const auto& r : report.runs) acc_s.push_back(r.acc_s);
    VariantValues delta{};
    for (std::size_t v = 0; v < 4; ++v) {
        std::vector<double> acc_v;
        for (const auto& r : report.runs) acc_v.push_back(r.acc_variant[v]);
        report.delta_gen[v] = delta_general(acc_s, acc_v);
        if (report.num_classes == 2) delta[v] = delta_binary(acc_s, acc_v);
    }
    if (report.num_classes == 2) report.delta = delta;
    double sum = 0.0;
    for (double a : acc_s) sum += a;
    report.mean_acc_s = sum / static_cast<double>(acc_s.size());
}

namespace {

RunResult run_once(const std::vector<LabeledImage>& pool, int num_classes, ModelProvider& provider,
                   const AuditConfig& config, std::uint64_t seed, int run, const AuditHooks& hooks) {
    const std::uint64_t run_seed = derive_seed(seed, "run", static_cast<std::uint64_t>(run));
    Rng split_rng(derive_seed(run_seed, "split"));
    const LabeledDataset dataset = split_dataset(pool, num_classes, config.split, split_rng);

    auto classifier = provider.obtain(dataset, run, run_seed);
    if (!classifier) throw ConfigError("model provider returned no classifier");
    if (classifier->num_classes() != num_classes)
        throw ConfigError("classifier has " + std::to_string(classifier->num_classes()) + " classes, dataset has " +
                          std::to_string(num_classes));

    RunResult result;
    result.run_index = run;
    result.acc_s = test_accuracy(*classifier, dataset);
    result.test_count = dataset.indices_of(Split::test).size();

    const auto sets = avg::sample_averaging_sets(dataset, config.num_sets, config.fraction, Rng(derive_seed(run_seed, "sets")));
    std::vector<avg::VariantImages> built(sets.size());
    parallel_for(sets.size(), [&](std::size_t i) { built[i] = avg::build_variants(sets[i], dataset); });
    if (hooks.on_averages)
        for (std::size_t i = 0; i < sets.size(); ++i) hooks.on_averages(run, sets[i], built[i]);

    std::vector<VariantSample> samples;
    samples.reserve(sets.size() * 4);
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (auto v : avg::kAllVariants) samples.push_back(VariantSample{v, built[i][v], sets[i].class_label});
    const auto scored = evaluate_on_average_images(*classifier, samples);
    result.acc_variant = scored.accuracy;
    result.averages_per_variant = scored.counts[0];
    return result;
}

} // namespace

AuditReport run_audit(const LabeledDataset& dataset, ModelProvider& provider, const AuditConfig& config,
                      std::uint64_t seed, std::string imager_id, const AuditHooks& hooks) {
    config.validate();
    AuditReport report;
    report.imager_id = std::move(imager_id);
    report.num_classes = dataset.num_classes();

    // Preprocess once; the same representation feeds training, testing and averaging.
    const auto pre = provider.preprocess();
    std::vector<LabeledImage> pool(dataset.size());
    parallel_for(dataset.size(), [&](std::size_t i) {
        const auto& item = dataset.items()[i];
        auto image = pre == learn::Preprocess::none ? item.image
                                                    : std::make_shared<const Image>(learn::apply_preprocess(*item.image, pre));
        pool[i] = LabeledImage{item.id, std::move(image), item.label};
    });

    for (int run = 0; run < config.num_runs; ++run) {
        try {
            report.runs.push_back(run_once(pool, dataset.num_classes(), provider, config, seed, run, hooks));
        } catch (const std::exception& e) {
            report.failure = "run " + std::to_string(run) + ": " + e.what();
            finalize_report(report);
            if (hooks.on_progress) hooks.on_progress(report);
            throw;
        }
        finalize_report(report);
        if (hooks.on_progress) hooks.on_progress(report);
    }
    return report;
}

} // namespace avgaudit::audit
