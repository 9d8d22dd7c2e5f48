#pragma once

#include "avgaudit/core/dataset.hpp"
#include "avgaudit/core/image.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace avgaudit::avg {

// The four class-average variants probed by the audit.
enum class AverageVariant { standard = 0, color = 1, range = 2, filtered = 3 };

inline constexpr std::array<AverageVariant, 4> kAllVariants{
    AverageVariant::standard, AverageVariant::color, AverageVariant::range, AverageVariant::filtered};

std::string_view to_string(AverageVariant v) noexcept;
std::optional<AverageVariant> parse_variant(std::string_view name) noexcept;

// Per-pixel arithmetic mean. Throws DataError on an empty list or mismatched shapes.
Image average_image(std::span<const Image> images);
Image average_image(std::span<const Image* const> images);

// Every pixel of channel c replaced by the mean of channel c.
Image average_color(const Image& avg);

// avg - min(avg), with one global minimum over all pixels and channels.
Image range_image(const Image& avg);

// 5x5 per-channel median, mirror border. Throws DataError below 5x5.
Image filtered_average(const Image& avg);

// All four variants, indexed by AverageVariant.
struct VariantImages {
    std::array<Image, 4> images;

    const Image& operator[](AverageVariant v) const noexcept { return images[static_cast<std::size_t>(v)]; }
    Image& operator[](AverageVariant v) noexcept { return images[static_cast<std::size_t>(v)]; }
};

VariantImages variants_from_average(const Image& standard);

} // namespace avgaudit::avg
