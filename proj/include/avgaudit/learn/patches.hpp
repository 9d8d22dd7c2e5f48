#pragma once

#include "avgaudit/core/image.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace avgaudit::learn {

// Fixed crop positions of the five-crop scheme.
enum class PatchPosition { tl = 0, tr = 1, bl = 2, br = 3, ce = 4 };

inline constexpr std::array<PatchPosition, 5> kAllPositions{
    PatchPosition::tl, PatchPosition::tr, PatchPosition::bl, PatchPosition::br, PatchPosition::ce};

std::string_view to_string(PatchPosition p) noexcept;
std::optional<PatchPosition> parse_position(std::string_view name) noexcept;

struct PatchSpec {
    int size = 256;
    std::vector<PatchPosition> positions{kAllPositions.begin(), kAllPositions.end()};

    // Throws ConfigError for size < 1 or an empty/duplicated position list.
    void validate() const;
};

// Top-left anchor (row, col): tl=(0,0), tr=(0,w-s), bl=(h-s,0),
// br=(h-s,w-s), ce=(floor((h-s)/2), floor((w-s)/2)).
std::pair<int, int> patch_anchor(PatchPosition p, int height, int width, int size);

// Exact crop at a position. Throws DataError if the image is smaller than size.
Image extract_patch(const Image& image, PatchPosition p, int size);

std::map<PatchPosition, Image> extract_five_crops(const Image& image, const PatchSpec& spec);

// First `count` non-overlapping block x block tiles in row-major order from
// the top-left corner. Throws DataError when fewer tiles fit.
std::vector<Image> extract_blocks(const Image& image, int block = 500, int count = 48);

// ---------------------------------------------------------------------------
// Prediction fusion. Ties always resolve to the lowest class index.
//   score_sum: argmax of the element-wise sum of score vectors
//   majority:  modal argmax of the individual vectors
// ---------------------------------------------------------------------------
enum class FusionRule { score_sum, majority };

std::string_view to_string(FusionRule r) noexcept;
std::optional<FusionRule> parse_fusion(std::string_view name) noexcept;

int argmax(std::span<const double> scores);

// Fused per-class vector: summed scores or vote counts. Throws DataError on
// an empty list or unequal lengths.
std::vector<double> fuse_scores(std::span<const std::vector<double>> scores, FusionRule rule);
int fuse_predictions(std::span<const std::vector<double>> scores, FusionRule rule);

} // namespace avgaudit::learn
