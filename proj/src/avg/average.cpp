#include "avgaudit/avg/average.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/filters/median.hpp"

#include <algorithm>
#include <string>

namespace avgaudit::avg {

std::string_view to_string(AverageVariant v) noexcept {
    switch (v) {
    case AverageVariant::standard: return "standard";
    case AverageVariant::color: return "color";
    case AverageVariant::range: return "range";
    case AverageVariant::filtered: return "filtered";
    }
    return "?";
}

std::optional<AverageVariant> parse_variant(std::string_view name) noexcept {
    for (auto v : kAllVariants)
        if (to_string(v) == name) return v;
    return std::nullopt;
}

Image average_image(std::span<const Image* const> images) {
    if (images.empty()) throw DataError("cannot average an empty image list");
    const Image& first = *images.front();
    for (const Image* img : images)
        if (!img->same_shape(first)) throw DataError("cannot average images of different shapes");

    Image out(first.height(), first.width(), first.channels(), 0.0);
    auto acc = out.pixels();
    for (const Image* img : images) {
        const auto px = img->pixels();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
    }
    const double n = static_cast<double>(images.size());
    for (double& v : acc) v /= n;
    return out;
}

Image average_image(std::span<const Image> images) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return average_image(std::span<const Image* const>(ptrs));
}

Image average_color(const Image& avg) {
    const int c = avg.channels();
    const std::size_t plane = static_cast<std::size_t>(avg.height()) * avg.width();
    std::vector<double> sums(static_cast<std::size_t>(c), 0.0);
    std::vector<char> constant(static_cast<std::size_t>(c), 1);
    const auto px = avg.pixels();
    for (std::size_t p = 0; p < plane; ++p)
        for (int ch = 0; ch < c; ++ch) {
            sums[static_cast<std::size_t>(ch)] += px[p * c + ch];
            if (px[p * c + ch] != px[static_cast<std::size_t>(ch)]) constant[static_cast<std::size_t>(ch)] = 0;
        }
    Image out(avg.height(), avg.width(), c);
    auto dst = out.pixels();
    for (int ch = 0; ch < c; ++ch) {
        // n copies of v need not sum to exactly n*v; a flat channel is kept
        // as is so the operation is exactly idempotent
        const double mean = constant[static_cast<std::size_t>(ch)]
                                ? px[static_cast<std::size_t>(ch)]
                                : sums[static_cast<std::size_t>(ch)] / static_cast<double>(plane);
        for (std::size_t p = 0; p < plane; ++p) dst[p * c + ch] = mean;
    }
    return out;
}

Image range_image(const Image& avg) {
    const auto px = avg.pixels();
    if (px.empty()) throw DataError("range_image of an empty image");
    const double lo = *std::min_element(px.begin(), px.end());
    Image out = avg;
    for (double& v : out.pixels()) v -= lo;
    return out;
}

Image filtered_average(const Image& avg) {
    return filters::median_filter(avg, 5);
}

VariantImages variants_from_average(const Image& standard) {
    VariantImages out;
    out[AverageVariant::standard] = standard;
    out[AverageVariant::color] = average_color(standard);
    out[AverageVariant::range] = range_image(standard);
    out[AverageVariant::filtered] = filtered_average(standard);
    return out;
}

} // namespace avgaudit::avg
