#pragma once

#include "avgaudit/core/image.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avgaudit::filters {

// ---------------------------------------------------------------------------
// Kernel: odd k x k spatial filter with `depth` slices.
// Storage is slice-major: weight(m, n, d) = weights[(d * k + m) * k + n], so
// each depth slice is a contiguous k*k span. (m, n) = (r, r) is the centre,
// r = k / 2.
// ---------------------------------------------------------------------------
class Kernel {
public:
    Kernel() = default;
    Kernel(int size, int depth, std::vector<double> weights);

    int size() const noexcept { return size_; }
    int depth() const noexcept { return depth_; }
    double weight(int m, int n, int d = 0) const noexcept { return weights_[(static_cast<std::size_t>(d) * size_ + m) * size_ + n]; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<double> weights() noexcept { return weights_; }
    std::span<const double> slice(int d) const noexcept {
        return std::span<const double>(weights_).subspan(static_cast<std::size_t>(d) * size_ * size_, static_cast<std::size_t>(size_) * size_);
    }
    std::span<double> slice(int d) noexcept {
        return std::span<double>(weights_).subspan(static_cast<std::size_t>(d) * size_ * size_, static_cast<std::size_t>(size_) * size_);
    }

    // Centred zero padding to a larger odd size.
    Kernel padded_to(int size) const;

    friend bool operator==(const Kernel&, const Kernel&) = default;

private:
    int size_ = 0;
    int depth_ = 0;
    std::vector<double> weights_;
};

struct BankEntry {
    std::string name;
    Kernel kernel;      // normalized: integer taps divided by `divisor`
    double divisor = 1.0;
};

// ---------------------------------------------------------------------------
// FilterBank: fixed single-depth kernels zero-padded to a common size.
//
// Text format, one block per kernel:
//   name, k, divisor
//   k rows of k integers
// Blank lines and lines starting with '#' are ignored.
// ---------------------------------------------------------------------------
struct FilterBank {
    std::string name;
    std::vector<BankEntry> entries;
    std::string source_text;   // verbatim text the bank was parsed from

    int kernel_size() const noexcept { return entries.empty() ? 0 : entries.front().kernel.size(); }
    std::size_t count() const noexcept { return entries.size(); }
};

// Throws FormatError on malformed text.
FilterBank parse_filter_bank(std::string_view text, std::string name);
FilterBank load_filter_bank(const std::filesystem::path& path);

// The bundled basic high-pass bank (data/srm_basic.txt, compiled in).
const FilterBank& srm_filter_bank();

// 2-D cross-correlation (no kernel flip) of one channel with one kernel
// slice, mirror padding, same spatial size:
//   out(i, j) = sum_{m,n} w(m, n) * x(i + m - r, j + n - r)
Image cross_correlate(const Image& plane, std::span<const double> taps, int k);

// Channel c of the result is kernel c applied to every input channel and
// summed over channels.
Image apply_filter_bank(const Image& image, const FilterBank& bank);

} // namespace avgaudit::filters
