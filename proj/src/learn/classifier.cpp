#include "avgaudit/learn/classifier.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/parallel.hpp"
#include "avgaudit/filters/median.hpp"

namespace avgaudit::learn {

std::string_view to_string(Preprocess p) noexcept {
    return p == Preprocess::median_residual ? "median_residual" : "none";
}

std::optional<Preprocess> parse_preprocess(std::string_view name) noexcept {
    if (name == "none") return Preprocess::none;
    if (name == "median_residual") return Preprocess::median_residual;
    return std::nullopt;
}

Image apply_preprocess(const Image& image, Preprocess p) {
    if (p == Preprocess::median_residual) return filters::residual_transform(image);
    return image;
}

std::vector<std::vector<double>> Classifier::predict_batch(std::span<const Image> images) const {
    std::vector<std::vector<double>> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) { out[i] = predict(images[i]); });
    return out;
}

int Classifier::classify(const Image& image) const {
    return argmax(predict(image));
}

PatchEnsembleClassifier::PatchEnsembleClassifier(std::map<PatchPosition, TinyNet> models, int patch_size,
                                                 FusionRule fusion, Preprocess preprocess, std::string name)
    : models_(std::move(models)), patch_size_(patch_size), fusion_(fusion), preprocess_(preprocess),
      name_(std::move(name)) {
    if (models_.empty()) throw ConfigError("patch ensemble needs at least one model");
    num_classes_ = models_.begin()->second.arch().num_classes;
    for (const auto& [pos, net] : models_)
        if (net.arch().num_classes != num_classes_) throw ConfigError("ensemble models disagree on the class count");
    if (patch_size_ < models_.begin()->second.arch().min_input_size())
        throw ConfigError("patch size is below the network minimum");
}

std::vector<double> PatchEnsembleClassifier::predict(const Image& image) const {
    std::vector<std::vector<double>> scores;
    scores.reserve(models_.size());
    for (const auto& [pos, net] : models_) scores.push_back(net.scores(extract_patch(image, pos, patch_size_)));
    return fuse_scores(scores, fusion_);
}

BlockMajorityClassifier::BlockMajorityClassifier(std::shared_ptr<const Classifier> inner, int block, int count)
    : inner_(std::move(inner)), block_(block), count_(count) {
    if (!inner_) throw ConfigError("block classifier needs an inner classifier");
    if (block_ < 1 || count_ < 1) throw ConfigError("block size and count must be positive");
}

std::vector<double> BlockMajorityClassifier::predict(const Image& image) const {
    const auto blocks = extract_blocks(image, block_, count_);
    std::vector<std::vector<double>> scores;
    scores.reserve(blocks.size());
    for (const auto& b : blocks) scores.push_back(inner_->predict(b));
    return fuse_scores(scores, FusionRule::majority);
}

} // namespace avgaudit::learn
