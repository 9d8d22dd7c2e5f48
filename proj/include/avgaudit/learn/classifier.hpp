#pragma once

#include "avgaudit/core/image.hpp"
#include "avgaudit/learn/patches.hpp"
#include "avgaudit/learn/tinynet.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avgaudit::learn {

// Input transform bound to a classifier. It is applied to training, validation
// and test images and to every member image before averaging, so the model
// always sees the representation it was trained on.
enum class Preprocess { none, median_residual };

std::string_view to_string(Preprocess p) noexcept;
std::optional<Preprocess> parse_preprocess(std::string_view name) noexcept;

Image apply_preprocess(const Image& image, Preprocess p);

// Scores are per class, higher = more likely. Inputs are expected to be
// preprocessed already (see preprocess()).
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string name() const = 0;
    virtual int num_classes() const = 0;
    virtual Preprocess preprocess() const { return Preprocess::none; }

    virtual std::vector<double> predict(const Image& image) const = 0;
    // Default: predict() on every image, in parallel, order-preserving.
    virtual std::vector<std::vector<double>> predict_batch(std::span<const Image> images) const;

    // argmax of predict(), ties to the lowest class.
    int classify(const Image& image) const;
};

// One TinyNet per patch position; each sees its own crop, outputs are fused.
// With score_sum the returned vector is the summed softmax scores, with
// majority it is the vote count per class.
class PatchEnsembleClassifier : public Classifier {
public:
    PatchEnsembleClassifier(std::map<PatchPosition, TinyNet> models, int patch_size, FusionRule fusion,
                            Preprocess preprocess, std::string name = "tinynet");

    std::string name() const override { return name_; }
    int num_classes() const override { return num_classes_; }
    Preprocess preprocess() const override { return preprocess_; }
    std::vector<double> predict(const Image& image) const override;

    const std::map<PatchPosition, TinyNet>& models() const noexcept { return models_; }
    int patch_size() const noexcept { return patch_size_; }
    FusionRule fusion() const noexcept { return fusion_; }

private:
    std::map<PatchPosition, TinyNet> models_;
    int patch_size_;
    FusionRule fusion_;
    Preprocess preprocess_;
    std::string name_;
    int num_classes_ = 0;
};

// Large-image path: the first `count` block x block tiles are classified by
// the inner classifier and the result is the per-class vote count.
class BlockMajorityClassifier : public Classifier {
public:
    BlockMajorityClassifier(std::shared_ptr<const Classifier> inner, int block = 500, int count = 48);

    std::string name() const override { return inner_->name() + "+blocks"; }
    int num_classes() const override { return inner_->num_classes(); }
    Preprocess preprocess() const override { return inner_->preprocess(); }
    std::vector<double> predict(const Image& image) const override;

private:
    std::shared_ptr<const Classifier> inner_;
    int block_;
    int count_;
};

} // namespace avgaudit::learn
