#include "avgaudit/core/image.hpp"

#include "avgaudit/core/error.hpp"

#include <cmath>
#include <string>

namespace avgaudit {

namespace {

void check_dims(int height, int width, int channels) {
    if (height <= 0 || width <= 0)
        throw DataError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                        std::to_string(width));
    if (channels <= 0) throw DataError("image channel count must be positive, got " + std::to_string(channels));
}

} // namespace

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
    check_dims(height, width, channels);
    if (pixels_.size() != static_cast<std::size_t>(height) * width * channels)
        throw DataError("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                        std::to_string(height) + "x" + std::to_string(width) + "x" +
                        std::to_string(channels));
    check_finite();
}

void Image::check_finite() const {
    for (double v : pixels_)
        if (!std::isfinite(v)) throw DataError("image contains a non-finite value");
}

Image Image::crop(int row, int col, int h, int w) const {
    if (row < 0 || col < 0 || h <= 0 || w <= 0 || row + h > height_ || col + w > width_)
        throw DataError("crop window (" + std::to_string(row) + "," + std::to_string(col) + ")+" +
                        std::to_string(h) + "x" + std::to_string(w) + " leaves a " +
                        std::to_string(height_) + "x" + std::to_string(width_) + " image");
    Image out(h, w, channels_);
    const std::size_t span = static_cast<std::size_t>(w) * channels_;
    for (int r = 0; r < h; ++r) {
        const double* src = &pixels_[index(row + r, col, 0)];
        std::copy(src, src + span, &out.pixels_[out.index(r, 0, 0)]);
    }
    return out;
}

Image Image::channel(int ch) const {
    Image out(height_, width_, 1);
    const std::size_t n = static_cast<std::size_t>(height_) * width_;
    for (std::size_t i = 0; i < n; ++i) out.pixels_[i] = pixels_[i * channels_ + ch];
    return out;
}

} // namespace avgaudit
