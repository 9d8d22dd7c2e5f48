#pragma once

#include "avgaudit/filters/kernel.hpp"

#include <span>

namespace avgaudit {
class Rng;
}

namespace avgaudit::filters {

// Off-centre sums below this magnitude cannot be rescaled; the slice is
// redrawn from the initialization distribution instead.
inline constexpr double kDegenerateSum = 1e-8;

// Projects one k x k slice onto the residual constraint: centre = -1 and
// off-centre weights scaled to sum to 1. A slice already within 1e-14 of the
// constraint is left bit-for-bit unchanged.
//
// A degenerate slice is redrawn uniformly from +-init_bound and then
// projected; this needs `rng` (DataError if null). Returns true when the
// slice was redrawn.
bool project_constrained_slice(std::span<double> slice, int k, Rng* rng = nullptr, double init_bound = 0.0);

// Applies the projection to every depth slice.
Kernel project_constrained_kernel(const Kernel& kernel, Rng* rng = nullptr, double init_bound = 0.0);

} // namespace avgaudit::filters
