#include "avgaudit/core/dataset.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace avgaudit {

const char* to_string(Split split) noexcept {
    switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

LabeledDataset::LabeledDataset(std::vector<DatasetItem> items, int num_classes, std::string name)
    : items_(std::move(items)), num_classes_(num_classes), name_(std::move(name)) {
    if (num_classes_ < 2) throw DataError("a dataset needs at least 2 classes");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(num_classes_), 0);
    for (const auto& item : items_) {
        if (item.label < 0 || item.label >= num_classes_)
            throw DataError("label " + std::to_string(item.label) + " outside [0," +
                            std::to_string(num_classes_) + ")");
        if (!item.image) throw DataError("dataset item '" + item.id + "' has no image");
        ++per_class[static_cast<std::size_t>(item.label)];
    }
    for (int k = 0; k < num_classes_; ++k)
        if (per_class[static_cast<std::size_t>(k)] == 0)
            throw DataError("class " + std::to_string(k) + " has no items");
}

std::vector<std::size_t> LabeledDataset::indices_of(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].split == split) out.push_back(i);
    return out;
}

std::vector<std::size_t> LabeledDataset::indices_of_class(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].label == label) out.push_back(i);
    return out;
}

std::size_t LabeledDataset::count(int label) const {
    return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(),
                                                  [&](const auto& it) { return it.label == label; }));
}

LabeledDataset LabeledDataset::with_splits(const std::vector<Split>& splits) const {
    if (splits.size() != items_.size()) throw DataError("split assignment length mismatch");
    auto items = items_;
    for (std::size_t i = 0; i < items.size(); ++i) items[i].split = splits[i];
    return LabeledDataset(std::move(items), num_classes_, name_);
}

namespace {

// Largest-remainder apportionment of n items; ties go to the earlier split.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& fractions) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = fractions[s] * static_cast<double>(n);
        // Guard against 0.8 * 10 landing a hair under 8.
        const double rounded = std::round(exact);
        const double base = std::abs(exact - rounded) < 1e-9 ? rounded : std::floor(exact);
        counts[s] = static_cast<std::size_t>(base);
        remainder[s] = exact - base;
        assigned += counts[s];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (remainder[s] > remainder[best]) best = s;
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }
    while (assigned > n) {  // only reachable through the rounding guard
        int largest = 0;
        for (int s = 1; s < 3; ++s)
            if (counts[s] > counts[largest]) largest = s;
        --counts[largest];
        --assigned;
    }
    // Every split with a nonzero fraction gets at least one item.
    for (int s = 0; s < 3; ++s) {
        if (fractions[s] > 0.0 && counts[s] == 0) {
            int donor = 0;
            for (int t = 1; t < 3; ++t)
                if (counts[t] > counts[donor]) donor = t;
            --counts[donor];
            ++counts[s];
        }
    }
    return counts;
}

} // namespace

LabeledDataset split_dataset(const std::vector<LabeledImage>& items, int num_classes,
                             const SplitFractions& fractions, Rng& rng, std::string name) {
    double total = 0.0;
    int nonzero = 0;
    for (double f : fractions) {
        if (!(f >= 0.0) || f > 1.0) throw ConfigError("split fractions must lie in [0,1]");
        total += f;
        nonzero += f > 0.0 ? 1 : 0;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(std::max(num_classes, 0)));
    for (std::size_t i = 0; i < items.size(); ++i) {
        const int label = items[i].label;
        if (label < 0 || label >= num_classes)
            throw DataError("label " + std::to_string(label) + " outside [0," +
                            std::to_string(num_classes) + ")");
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }

    std::vector<DatasetItem> out(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        out[i] = DatasetItem{items[i].id, items[i].image, items[i].label, Split::train};

    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& members = by_class[k];
        if (members.size() < static_cast<std::size_t>(nonzero))
            throw DataError("class " + std::to_string(k) + " has " + std::to_string(members.size()) +
                            " items, fewer than the " + std::to_string(nonzero) + " requested splits");
        Rng class_rng = rng.derive("split-class", k);
        class_rng.shuffle(std::span<std::size_t>(members));
        const auto counts = apportion(members.size(), fractions);
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t c = 0; c < counts[s]; ++c) out[members[pos++]].split = static_cast<Split>(s);
    }
    return LabeledDataset(std::move(out), num_classes, std::move(name));
}

std::vector<LabeledImage> load_image_tree(const std::filesystem::path& root, int* num_classes,
                                          std::vector<std::string>* class_names) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root '" + root.string() + "' is not a directory");

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());
    if (classes.size() < 2) throw DataError("dataset root '" + root.string() + "' has fewer than 2 class directories");

    std::vector<LabeledImage> out;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(root / classes[k]))
            if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            out.push_back(LabeledImage{classes[k] + "/" + f.filename().string(),
                                       std::make_shared<const Image>(load_image(f)),
                                       static_cast<int>(k)});
    }
    if (num_classes) *num_classes = static_cast<int>(classes.size());
    if (class_names) *class_names = classes;
    return out;
}

} // namespace avgaudit
