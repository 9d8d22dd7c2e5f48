#include "avgaudit/learn/training.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace avgaudit::learn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1 (got " + std::to_string(epochs) + ")");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    // A zero rate is accepted: it freezes the model, which is useful as a control.
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and non-negative");
    if (optimizer == OptimizerKind::sgd_momentum && !(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must lie in [0, 1)");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i].epoch < 0) throw ConfigError("schedule epochs must be non-negative");
        if (!(schedule[i].lr >= 0.0) || !std::isfinite(schedule[i].lr))
            throw ConfigError("schedule rates must be finite and non-negative");
        if (i > 0 && schedule[i].epoch <= schedule[i - 1].epoch)
            throw ConfigError("schedule must be strictly increasing in epoch");
    }
}

double TrainConfig::lr_at_epoch(int epoch) const {
    double rate = lr;
    for (const auto& s : schedule)
        if (s.epoch <= epoch) rate = s.lr;
    return rate;
}

PatchSet make_patch_set(const LabeledDataset& dataset, Split split, PatchPosition position, int size,
                        Preprocess preprocess) {
    const auto idx = dataset.indices_of(split);
    PatchSet out;
    out.patches.resize(idx.size());
    out.labels.resize(idx.size());
    parallel_for(idx.size(), [&](std::size_t i) {
        const auto& item = dataset.items()[idx[i]];
        out.patches[i] = extract_patch(apply_preprocess(*item.image, preprocess), position, size);
        out.labels[i] = item.label;
    });
    return out;
}

double accuracy(const TinyNet& net, const PatchSet& set) {
    if (set.patches.empty()) return 0.0;
    std::vector<char> hit(set.patches.size(), 0);
    parallel_for(set.patches.size(), [&](std::size_t i) {
        hit[i] = argmax(net.logits(set.patches[i])) == set.labels[i] ? 1 : 0;
    });
    return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(hit.size());
}

namespace {

void check_sets(const TinyNetArch& arch, const PatchSet& train, const PatchSet& validation) {
    if (train.patches.empty()) throw DataError("training split is empty");
    for (const auto* set : {&train, &validation}) {
        if (set->patches.size() != set->labels.size()) throw DataError("patch and label counts differ");
        for (int label : set->labels)
            if (label < 0 || label >= arch.num_classes) throw DataError("label outside the class range");
    }
}

TinyNet init_net(const TinyNetArch& arch, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "init"));
    return TinyNet(arch, rng);
}

} // namespace

TrainSession::TrainSession(const TinyNetArch& arch, TrainConfig config, PatchSet train, PatchSet validation)
    : config_((config.validate(), std::move(config))), train_(std::move(train)), validation_(std::move(validation)),
      net_(init_net(arch, config_.seed)) {
    check_sets(arch, train_, validation_);
    optimizer_.kind = config_.optimizer;
    optimizer_.momentum = config_.momentum;
}

TrainSession::TrainSession(TinyNet net, OptimizerState optimizer, std::vector<EpochStats> history, TrainConfig config,
                           PatchSet train, PatchSet validation)
    : config_((config.validate(), std::move(config))), train_(std::move(train)), validation_(std::move(validation)),
      net_(std::move(net)), optimizer_(std::move(optimizer)), history_(std::move(history)) {
    check_sets(net_.arch(), train_, validation_);
    if (optimizer_.kind != config_.optimizer) throw ConfigError("saved optimizer state does not match the config");
    const auto batches = (train_.patches.size() + static_cast<std::size_t>(config_.batch_size) - 1) /
                         static_cast<std::size_t>(config_.batch_size);
    steps_ = static_cast<std::int64_t>(batches) * epochs_done();
}

const EpochStats& TrainSession::run_epoch() {
    if (finished()) throw ConfigError("training already finished");
    const int epoch = epochs_done();
    const double lr = config_.lr_at_epoch(epoch);
    const std::size_t n = train_.patches.size();
    const std::size_t P = net_.parameter_count();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config_.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    const std::size_t B = static_cast<std::size_t>(config_.batch_size);
    std::vector<double> sample_grads(B * P), sample_loss(B), grad(P);
    std::vector<char> sample_hit(B);
    double loss_sum = 0.0;
    std::size_t hits = 0;

    for (std::size_t start = 0; start < n; start += B) {
        const std::size_t bs = std::min(B, n - start);
        std::fill(sample_grads.begin(), sample_grads.begin() + static_cast<std::ptrdiff_t>(bs * P), 0.0);
        parallel_for(bs, [&](std::size_t b) {
            const std::size_t i = order[start + b];
            std::vector<double> probs;
            sample_loss[b] = net_.loss_and_gradient(train_.patches[i], train_.labels[i],
                                                    std::span<double>(sample_grads.data() + b * P, P), &probs);
            sample_hit[b] = argmax(probs) == train_.labels[i] ? 1 : 0;
        });

        // Fixed-order reduction keeps the result independent of the worker count.
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < bs; ++b) {
            const double* g = sample_grads.data() + b * P;
            for (std::size_t p = 0; p < P; ++p) grad[p] += g[p];
            batch_loss += sample_loss[b];
            hits += static_cast<std::size_t>(sample_hit[b]);
        }
        if (!std::isfinite(batch_loss))
            throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(steps_) + " (lr " + std::to_string(lr) + ")");
        loss_sum += batch_loss;
        for (double& g : grad) g /= static_cast<double>(bs);

        optimizer_.step(net_.parameters(), grad, lr);
        Rng redraw(derive_seed(config_.seed, "redraw", static_cast<std::uint64_t>(steps_)));
        net_.project_constraints(&redraw);
        for (double v : net_.parameters())
            if (!std::isfinite(v)) throw NumericError("training diverged: non-finite parameter after step " + std::to_string(steps_));
        ++steps_;
        if (on_step) on_step(net_, steps_);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    stats.validation_accuracy = accuracy(net_, validation_);
    history_.push_back(stats);
    return history_.back();
}

void TrainSession::run(std::optional<int> stop_after) {
    while (!finished() && (!stop_after || epochs_done() < *stop_after)) run_epoch();
}

TrainResult train_tinynet(const LabeledDataset& dataset, const TrainConfig& config, const TinyNetArch& arch,
                          PatchPosition position, int patch_size, Preprocess preprocess) {
    config.validate();
    TrainSession session(arch, config, make_patch_set(dataset, Split::train, position, patch_size, preprocess),
                         make_patch_set(dataset, Split::validation, position, patch_size, preprocess));
    session.run();
    return TrainResult{session.net(), session.history()};
}

} // namespace avgaudit::learn
