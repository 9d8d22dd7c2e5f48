#include "avgaudit/filters/constrained.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/rng.hpp"

#include <cmath>
#include <iostream>

namespace avgaudit::filters {

bool project_constrained_slice(std::span<double> slice, int k, Rng* rng, double init_bound) {
    const std::size_t centre = static_cast<std::size_t>(k / 2) * k + k / 2;
    bool redrawn = false;
    for (int attempt = 0;; ++attempt) {
        double off_centre = 0.0;
        for (std::size_t i = 0; i < slice.size(); ++i)
            if (i != centre) off_centre += slice[i];

        if (std::abs(off_centre) >= kDegenerateSum) {
            slice[centre] = -1.0;
            if (std::abs(off_centre - 1.0) > 1e-14)
                for (std::size_t i = 0; i < slice.size(); ++i)
                    if (i != centre) slice[i] /= off_centre;
            return redrawn;
        }

        if (!rng) throw DataError("degenerate constrained kernel slice and no generator to redraw it");
        if (attempt >= 16) throw NumericError("constrained kernel slice stays degenerate after redraws");
        std::cerr << "warning: constrained kernel slice has off-centre sum " << off_centre
                  << "; redrawing from the init distribution\n";
        for (double& v : slice) v = rng->uniform(-init_bound, init_bound);
        redrawn = true;
    }
}

Kernel project_constrained_kernel(const Kernel& kernel, Rng* rng, double init_bound) {
    Kernel out = kernel;
    for (int d = 0; d < out.depth(); ++d) project_constrained_slice(out.slice(d), out.size(), rng, init_bound);
    return out;
}

} // namespace avgaudit::filters
