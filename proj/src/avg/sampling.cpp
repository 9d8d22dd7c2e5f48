#include "avgaudit/avg/sampling.hpp"

#include "avgaudit/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace avgaudit::avg {

std::vector<AveragingSet> sample_averaging_sets(const LabeledDataset& dataset, int num_sets, double fraction,
                                                const Rng& rng) {
    if (num_sets < 1) throw ConfigError("num_sets must be at least 1");
    if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("averaging fraction must lie in (0,1]");

    const int k = dataset.num_classes();
    std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) pools[static_cast<std::size_t>(c)] = dataset.indices_of_class(c);
    std::size_t smallest = pools.front().size();
    for (const auto& p : pools) smallest = std::min(smallest, p.size());

    // Tolerate fraction * size landing a hair below an integer (0.8 * 10).
    const double exact = fraction * static_cast<double>(smallest);
    const auto n = static_cast<std::size_t>(std::floor(exact + 1e-9));
    if (n == 0)
        throw DataError("averaging fraction " + std::to_string(fraction) + " of the smallest class (" +
                        std::to_string(smallest) + " items) selects no images");

    std::vector<AveragingSet> sets;
    sets.reserve(static_cast<std::size_t>(num_sets) * k);
    for (int s = 0; s < num_sets; ++s) {
        for (int c = 0; c < k; ++c) {
            const auto& pool = pools[static_cast<std::size_t>(c)];
            Rng draw = rng.derive("averaging-set", static_cast<std::uint64_t>(s) * 1024u + static_cast<std::uint64_t>(c));
            AveragingSet set{c, s, {}};
            for (std::size_t pick : draw.sample_without_replacement(pool.size(), n)) set.member_ids.push_back(pool[pick]);
            sets.push_back(std::move(set));
        }
    }
    return sets;
}

VariantImages build_variants(const AveragingSet& set, const LabeledDataset& dataset, const ImageTransform& preprocess) {
    if (set.member_ids.empty()) throw DataError("averaging set is empty");
    const auto& items = dataset.items();
    std::vector<Image> transformed;
    std::vector<const Image*> members;
    members.reserve(set.member_ids.size());
    if (preprocess) transformed.reserve(set.member_ids.size());
    for (std::size_t id : set.member_ids) {
        if (id >= items.size()) throw DataError("averaging set references item " + std::to_string(id) + " beyond the dataset");
        if (preprocess) {
            transformed.push_back(preprocess(*items[id].image));
            members.push_back(&transformed.back());
        } else {
            members.push_back(items[id].image.get());
        }
    }
    return variants_from_average(average_image(std::span<const Image* const>(members)));
}

} // namespace avgaudit::avg
