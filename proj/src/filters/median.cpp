#include "avgaudit/filters/median.hpp"

#include "avgaudit/core/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace avgaudit::filters {

namespace {

// Mirror-padded copy of one channel, (h + 2r) x (w + 2r).
std::vector<double> padded_plane(const Image& image, int ch, int r) {
    const int h = image.height(), w = image.width();
    const int pw = w + 2 * r;
    std::vector<double> out(static_cast<std::size_t>(h + 2 * r) * pw);
    for (int i = -r; i < h + r; ++i) {
        const int si = mirror_index(i, h);
        for (int j = -r; j < w + r; ++j)
            out[static_cast<std::size_t>(i + r) * pw + (j + r)] = image.at(si, mirror_index(j, w), ch);
    }
    return out;
}

} // namespace

Image median_filter(const Image& image, int k) {
    if (k != 3 && k != 5) throw DataError("median kernel must be 3 or 5, got " + std::to_string(k));
    if (image.height() < k || image.width() < k)
        throw DataError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                        " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " median kernel");
    const int h = image.height(), w = image.width(), r = k / 2;
    const int pw = w + 2 * r;
    const int mid = (k * k) / 2;
    Image out(h, w, image.channels());
    std::array<double, 25> window{};
    for (int ch = 0; ch < image.channels(); ++ch) {
        const auto plane = padded_plane(image, ch, r);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                int n = 0;
                for (int m = 0; m < k; ++m) {
                    const double* row = &plane[static_cast<std::size_t>(i + m) * pw + j];
                    for (int q = 0; q < k; ++q) window[static_cast<std::size_t>(n++)] = row[q];
                }
                std::nth_element(window.begin(), window.begin() + mid, window.begin() + n);
                out.at(i, j, ch) = window[static_cast<std::size_t>(mid)];
            }
        }
    }
    return out;
}

Image residual_transform(const Image& image) {
    const Image smooth = median_filter(image, 3);
    Image out(image.height(), image.width(), image.channels());
    auto dst = out.pixels();
    const auto a = image.pixels();
    const auto b = smooth.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(a[i] - b[i]);
    return out;
}

} // namespace avgaudit::filters
