#pragma once

#include "avgaudit/core/image.hpp"

namespace avgaudit::filters {

// Per-channel k x k median with mirror (edge-inclusive) border padding.
// k must be 3 or 5 and both image dimensions at least k; since k*k is odd
// the median is always a single sample. Throws DataError otherwise.
Image median_filter(const Image& image, int k);

// Median residual R = |Y - median3(Y)|, the content-suppressing
// preprocessing used ahead of residual-trained models.
Image residual_transform(const Image& image);

} // namespace avgaudit::filters
