#pragma once

#include "avgaudit/core/image.hpp"
#include "avgaudit/core/rng.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace avgaudit {

enum class Split { train = 0, validation = 1, test = 2 };

const char* to_string(Split split) noexcept;

// An image with its class label, before split assignment.
struct LabeledImage {
    std::string id;
    std::shared_ptr<const Image> image;
    int label = 0;
};

struct DatasetItem {
    std::string id;
    std::shared_ptr<const Image> image;
    int label = 0;
    Split split = Split::train;
};

// Fractions for (train, validation, test).
using SplitFractions = std::array<double, 3>;
inline constexpr SplitFractions kDefaultSplit{0.8, 0.1, 0.1};

// ---------------------------------------------------------------------------
// LabeledDataset: images with labels in [0, K) and split assignments.
// Invariants (checked at construction): K >= 2, every label < K, every
// class has at least one item.
// ---------------------------------------------------------------------------
class LabeledDataset {
public:
    LabeledDataset(std::vector<DatasetItem> items, int num_classes, std::string name = {});

    const std::vector<DatasetItem>& items() const noexcept { return items_; }
    int num_classes() const noexcept { return num_classes_; }
    const std::string& name() const noexcept { return name_; }
    std::size_t size() const noexcept { return items_.size(); }

    // Indices into items(), in stored order.
    std::vector<std::size_t> indices_of(Split split) const;
    std::vector<std::size_t> indices_of_class(int label) const;
    std::size_t count(int label) const;

    // Same items (shared images) with the split column replaced.
    LabeledDataset with_splits(const std::vector<Split>& splits) const;

private:
    std::vector<DatasetItem> items_;
    int num_classes_;
    std::string name_;
};

// Stratified split: each class is shuffled independently and cut by the
// largest-remainder rule, with every split of nonzero fraction receiving at
// least one item. Throws ConfigError for bad fractions and DataError when a
// class has fewer items than there are nonzero splits.
LabeledDataset split_dataset(const std::vector<LabeledImage>& items, int num_classes,
                             const SplitFractions& fractions, Rng& rng,
                             std::string name = {});

// Reads `<root>/<class_dir>/*.png`; class index = lexicographic order of the
// directory names, files sorted by name. All items start in Split::train.
std::vector<LabeledImage> load_image_tree(const std::filesystem::path& root, int* num_classes,
                                          std::vector<std::string>* class_names = nullptr);

} // namespace avgaudit
