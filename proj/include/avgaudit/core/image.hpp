#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace avgaudit {

// ---------------------------------------------------------------------------
// Image: a real-valued raster, row-major with interleaved channels.
//
// Photographs carry 1 or 3 channels (enforced at PNG I/O); filter-bank
// responses carry one channel per kernel.
// Nominal range is [0,255] but intermediate results (residuals, embedded
// signals, averages) may leave it; quantization only happens on 8-bit export.
// ---------------------------------------------------------------------------
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    // Throws DataError if the pixel count does not match or a value is not finite.
    Image(int height, int width, int channels, std::vector<double> pixels);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    std::size_t index(int row, int col, int ch) const noexcept {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
    }
    double& at(int row, int col, int ch = 0) noexcept { return pixels_[index(row, col, ch)]; }
    double at(int row, int col, int ch = 0) const noexcept { return pixels_[index(row, col, ch)]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    // Throws DataError if any pixel is NaN or infinite.
    void check_finite() const;

    // Copies rows [row, row+h) and cols [col, col+w). Throws DataError when
    // the window leaves the image.
    Image crop(int row, int col, int h, int w) const;

    // Extracts one channel as a single-channel image.
    Image channel(int ch) const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> pixels_;
};

// Symmetric (edge-inclusive) reflection of an index into [0, n):
// -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2. Valid for -n <= i < 2n.
constexpr int mirror_index(int i, int n) noexcept {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
}

} // namespace avgaudit
