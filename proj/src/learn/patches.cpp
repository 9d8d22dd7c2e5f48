#include "avgaudit/learn/patches.hpp"

#include "avgaudit/core/error.hpp"

#include <algorithm>
#include <string>

namespace avgaudit::learn {

std::string_view to_string(PatchPosition p) noexcept {
    switch (p) {
    case PatchPosition::tl: return "tl";
    case PatchPosition::tr: return "tr";
    case PatchPosition::bl: return "bl";
    case PatchPosition::br: return "br";
    case PatchPosition::ce: return "ce";
    }
    return "?";
}

std::optional<PatchPosition> parse_position(std::string_view name) noexcept {
    for (auto p : kAllPositions)
        if (to_string(p) == name) return p;
    return std::nullopt;
}

void PatchSpec::validate() const {
    if (size < 1) throw ConfigError("patch size must be positive");
    if (positions.empty()) throw ConfigError("patch spec needs at least one position");
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            if (positions[i] == positions[j]) throw ConfigError("duplicate patch position '" + std::string(to_string(positions[i])) + "'");
}

std::pair<int, int> patch_anchor(PatchPosition p, int height, int width, int size) {
    if (size < 1 || size > height || size > width)
        throw DataError("patch size " + std::to_string(size) + " does not fit a " + std::to_string(height) + "x" +
                        std::to_string(width) + " image");
    switch (p) {
    case PatchPosition::tl: return {0, 0};
    case PatchPosition::tr: return {0, width - size};
    case PatchPosition::bl: return {height - size, 0};
    case PatchPosition::br: return {height - size, width - size};
    case PatchPosition::ce: return {(height - size) / 2, (width - size) / 2};
    }
    return {0, 0};
}

Image extract_patch(const Image& image, PatchPosition p, int size) {
    const auto [row, col] = patch_anchor(p, image.height(), image.width(), size);
    return image.crop(row, col, size, size);
}

std::map<PatchPosition, Image> extract_five_crops(const Image& image, const PatchSpec& spec) {
    spec.validate();
    std::map<PatchPosition, Image> out;
    for (auto p : spec.positions) out.emplace(p, extract_patch(image, p, spec.size));
    return out;
}

std::vector<Image> extract_blocks(const Image& image, int block, int count) {
    if (block < 1 || count < 1) throw ConfigError("block size and count must be positive");
    const int rows = image.height() / block, cols = image.width() / block;
    if (static_cast<long long>(rows) * cols < count)
        throw DataError("a " + std::to_string(image.height()) + "x" + std::to_string(image.width()) + " image holds " +
                        std::to_string(rows * cols) + " blocks of " + std::to_string(block) + "x" + std::to_string(block) +
                        ", need " + std::to_string(count));
    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int b = 0; b < count; ++b) out.push_back(image.crop((b / cols) * block, (b % cols) * block, block, block));
    return out;
}

std::string_view to_string(FusionRule r) noexcept {
    return r == FusionRule::score_sum ? "score_sum" : "majority";
}

std::optional<FusionRule> parse_fusion(std::string_view name) noexcept {
    if (name == "score_sum") return FusionRule::score_sum;
    if (name == "majority") return FusionRule::majority;
    return std::nullopt;
}

int argmax(std::span<const double> scores) {
    if (scores.empty()) throw DataError("argmax of an empty score vector");
    int best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

std::vector<double> fuse_scores(std::span<const std::vector<double>> scores, FusionRule rule) {
    if (scores.empty()) throw DataError("cannot fuse an empty prediction list");
    const std::size_t k = scores.front().size();
    std::vector<double> fused(k, 0.0);
    for (const auto& s : scores) {
        if (s.size() != k) throw DataError("cannot fuse score vectors of different lengths");
        if (rule == FusionRule::score_sum)
            for (std::size_t c = 0; c < k; ++c) fused[c] += s[c];
        else
            fused[static_cast<std::size_t>(argmax(s))] += 1.0;
    }
    return fused;
}

int fuse_predictions(std::span<const std::vector<double>> scores, FusionRule rule) {
    return argmax(fuse_scores(scores, rule));
}

} // namespace avgaudit::learn
