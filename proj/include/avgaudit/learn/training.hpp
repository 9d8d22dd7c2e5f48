#pragma once

#include "avgaudit/core/dataset.hpp"
#include "avgaudit/learn/classifier.hpp"
#include "avgaudit/learn/optimizer.hpp"
#include "avgaudit/learn/patches.hpp"
#include "avgaudit/learn/tinynet.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace avgaudit::learn {

struct LrStep {
    int epoch = 0;   // 0-based epoch from which `lr` applies
    double lr = 0.0;

    friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adamax;
    double lr = 1e-3;
    double momentum = 0.95;        // sgd_momentum only
    std::vector<LrStep> schedule;  // sorted by epoch
    int epochs = 10;
    int batch_size = 16;
    std::uint64_t seed = 0;

    // Throws ConfigError: epochs < 1, batch_size < 1, negative or non-finite
    // rates, momentum outside [0,1), unsorted schedule.
    void validate() const;
    // Rate of the last schedule entry at or before `epoch`, else lr.
    double lr_at_epoch(int epoch) const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

// Patches cut from already preprocessed images.
struct PatchSet {
    std::vector<Image> patches;
    std::vector<int> labels;
};

PatchSet make_patch_set(const LabeledDataset& dataset, Split split, PatchPosition position, int size,
                        Preprocess preprocess);

// Mini-batch training of one TinyNet. Every random decision comes from a
// stream derived from config.seed and a fixed index (epoch shuffles,
// constraint redraws), so a session rebuilt from a saved state continues
// exactly as an uninterrupted one.
class TrainSession {
public:
    TrainSession(const TinyNetArch& arch, TrainConfig config, PatchSet train, PatchSet validation);
    // Resume from saved state.
    TrainSession(TinyNet net, OptimizerState optimizer, std::vector<EpochStats> history, TrainConfig config,
                 PatchSet train, PatchSet validation);

    bool finished() const noexcept { return epochs_done() >= config_.epochs; }
    int epochs_done() const noexcept { return static_cast<int>(history_.size()); }

    // Runs one epoch; throws NumericError on a non-finite loss.
    const EpochStats& run_epoch();
    // Runs until finished, or until `stop_after` epochs are done in total.
    void run(std::optional<int> stop_after = std::nullopt);

    const TinyNet& net() const noexcept { return net_; }
    const OptimizerState& optimizer() const noexcept { return optimizer_; }
    const std::vector<EpochStats>& history() const noexcept { return history_; }
    const TrainConfig& config() const noexcept { return config_; }

    // Called after every optimizer step (and projection) with the global step count.
    std::function<void(const TinyNet&, std::int64_t)> on_step;

private:
    TrainConfig config_;
    PatchSet train_, validation_;
    TinyNet net_;
    OptimizerState optimizer_;
    std::vector<EpochStats> history_;
    std::int64_t steps_ = 0;
};

struct TrainResult {
    TinyNet net;
    std::vector<EpochStats> history;
};

// Trains on the given patch of every train-split image; validation accuracy
// is recorded per epoch (0 when the split is empty).
TrainResult train_tinynet(const LabeledDataset& dataset, const TrainConfig& config, const TinyNetArch& arch,
                          PatchPosition position, int patch_size, Preprocess preprocess = Preprocess::none);

// Fraction of patches whose argmax equals the label.
double accuracy(const TinyNet& net, const PatchSet& set);

} // namespace avgaudit::learn
