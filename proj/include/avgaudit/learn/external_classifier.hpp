#pragma once

#include "avgaudit/learn/classifier.hpp"

#include <string>
#include <vector>

namespace avgaudit::learn {

// Black-box model behind a subprocess. For each batch the images are written
// as AVGI rasters into a scratch directory together with batch_manifest.txt
// (one path per line), then
//     <command...> --manifest <dir>/batch_manifest.txt --out <dir>/scores.csv
// is run. The command must exit 0 and write `index,score_0,...,score_{K-1}`
// with one row per manifest line in manifest order.
//
// Any failure (spawn error, nonzero exit, signal, bad CSV, wrong row count or
// width) raises AdapterError carrying the command's stderr.
class ExternalClassifier : public Classifier {
public:
    ExternalClassifier(std::vector<std::string> command, int num_classes, std::string name = "external",
                       Preprocess preprocess = Preprocess::none, std::size_t max_batch = 256);

    std::string name() const override { return name_; }
    int num_classes() const override { return num_classes_; }
    Preprocess preprocess() const override { return preprocess_; }

    std::vector<double> predict(const Image& image) const override;
    std::vector<std::vector<double>> predict_batch(std::span<const Image> images) const override;

    const std::vector<std::string>& command() const noexcept { return command_; }

private:
    std::vector<std::vector<double>> run_batch(std::span<const Image> images) const;

    std::vector<std::string> command_;
    int num_classes_;
    std::string name_;
    Preprocess preprocess_;
    std::size_t max_batch_;
};

// Whitespace-separated command line into argv (no quoting rules).
std::vector<std::string> split_command(const std::string& command);

// Parses an adapter scores CSV; throws AdapterError on any deviation.
std::vector<std::vector<double>> parse_scores_csv(const std::string& text, std::size_t rows, int num_classes);

} // namespace avgaudit::learn
