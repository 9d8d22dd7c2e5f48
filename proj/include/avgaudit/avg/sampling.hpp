#pragma once

#include "avgaudit/avg/average.hpp"
#include "avgaudit/core/dataset.hpp"
#include "avgaudit/core/rng.hpp"

#include <functional>
#include <vector>

namespace avgaudit::avg {

// Members of one class for one averaging round. member_ids index into
// LabeledDataset::items().
struct AveragingSet {
    int class_label = 0;
    int set_index = 0;
    std::vector<std::size_t> member_ids;
};

// Balanced averaging sets: n = floor(fraction * smallest class size) items
// are drawn per class without replacement from the class's full pool (all
// splits), independently for every set, so larger classes are undersampled.
// Output order: set 0 classes 0..K-1, set 1 classes 0..K-1, ...
// Each (set, class) draws from its own derived stream.
// Throws ConfigError for num_sets < 1 or fraction outside (0,1], DataError
// when n == 0.
std::vector<AveragingSet> sample_averaging_sets(const LabeledDataset& dataset, int num_sets, double fraction,
                                                const Rng& rng);

using ImageTransform = std::function<Image(const Image&)>;

// Averages the set's member images, each passed through `preprocess` first
// when given, and derives the four variants from that average.
VariantImages build_variants(const AveragingSet& set, const LabeledDataset& dataset,
                             const ImageTransform& preprocess = {});

} // namespace avgaudit::avg
