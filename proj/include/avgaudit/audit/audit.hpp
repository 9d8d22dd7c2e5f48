#pragma once

#include "avgaudit/avg/average.hpp"
#include "avgaudit/avg/sampling.hpp"
#include "avgaudit/core/dataset.hpp"
#include "avgaudit/learn/classifier.hpp"
#include "avgaudit/learn/training.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace avgaudit::audit {

using VariantValues = std::array<double, 4>;   // indexed by AverageVariant

struct RunResult {
    int run_index = 0;
    double acc_s = 0.0;
    VariantValues acc_variant{};
    std::size_t test_count = 0;
    std::size_t averages_per_variant = 0;
};

struct AuditConfig {
    int num_runs = 8;
    int num_sets = 20;
    double fraction = 0.8;
    SplitFractions split = kDefaultSplit;

    void validate() const;
};

struct AuditReport {
    std::string imager_id;
    int num_classes = 2;
    std::vector<RunResult> runs;
    std::optional<VariantValues> delta;   // only for two classes
    VariantValues delta_gen{};
    double mean_acc_s = 0.0;
    nlohmann::json config_snapshot;
    // Set when a run failed; the runs before it are kept.
    std::optional<std::string> failure;
};

// Supplies the classifier for one run. The dataset handed over is already
// preprocessed with preprocess() and carries this run's split assignment.
class ModelProvider {
public:
    virtual ~ModelProvider() = default;
    virtual learn::Preprocess preprocess() const = 0;
    virtual std::shared_ptr<const learn::Classifier> obtain(const LabeledDataset& dataset, int run_index,
                                                            std::uint64_t run_seed) = 0;
};

// Trains a fresh TinyNet per patch position and run (seeded from the run seed).
class TinyNetProvider : public ModelProvider {
public:
    TinyNetProvider(learn::TinyNetArch arch, learn::TrainConfig train, learn::PatchSpec patches,
                    learn::FusionRule fusion, learn::Preprocess preprocess);

    learn::Preprocess preprocess() const override { return preprocess_; }
    std::shared_ptr<const learn::Classifier> obtain(const LabeledDataset& dataset, int run_index,
                                                    std::uint64_t run_seed) override;

    // Per-run training curves, position-major, appended by obtain().
    struct Curve {
        int run_index;
        learn::PatchPosition position;
        std::vector<learn::EpochStats> history;
    };
    const std::vector<Curve>& curves() const noexcept { return curves_; }

private:
    learn::TinyNetArch arch_;
    learn::TrainConfig train_;
    learn::PatchSpec patches_;
    learn::FusionRule fusion_;
    learn::Preprocess preprocess_;
    std::vector<Curve> curves_;
};

// The same classifier for every run (checkpoint or external command).
class FixedProvider : public ModelProvider {
public:
    explicit FixedProvider(std::shared_ptr<const learn::Classifier> classifier) : classifier_(std::move(classifier)) {}
    learn::Preprocess preprocess() const override { return classifier_->preprocess(); }
    std::shared_ptr<const learn::Classifier> obtain(const LabeledDataset&, int, std::uint64_t) override {
        return classifier_;
    }

private:
    std::shared_ptr<const learn::Classifier> classifier_;
};

struct VariantSample {
    avg::AverageVariant variant;
    Image image;
    int true_class = 0;
};

struct VariantAccuracy {
    VariantValues accuracy{};
    std::array<std::size_t, 4> counts{};
};

// Average images are scored as they are (no renormalization), through the
// same crop-and-fuse path as test images. A variant with no samples gets
// accuracy 0 and count 0.
VariantAccuracy evaluate_on_average_images(const learn::Classifier& classifier, std::span<const VariantSample> samples);

// Fraction of test-split items the classifier labels correctly.
double test_accuracy(const learn::Classifier& classifier, const LabeledDataset& dataset);

struct AuditHooks {
    // Sees the report after every run, and once more with `failure` set if a
    // run throws (the exception is then rethrown).
    std::function<void(const AuditReport&)> on_progress;
    // Sees every averaging set's variants as they are built.
    std::function<void(int run, const avg::AveragingSet&, const avg::VariantImages&)> on_averages;
};

// Full protocol: for each run, resample the split, obtain a classifier,
// measure test accuracy, sample averaging sets, build the four variants and
// score them.
AuditReport run_audit(const LabeledDataset& dataset, ModelProvider& provider, const AuditConfig& config,
                      std::uint64_t seed, std::string imager_id = "synthetic", const AuditHooks& hooks = {});

// Recomputes delta, delta_gen and mean_acc_s from report.runs.
void finalize_report(AuditReport& report);

} // namespace avgaudit::audit
