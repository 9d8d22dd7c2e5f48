#pragma once

#include "avgaudit/cli/config.hpp"
#include "avgaudit/core/dataset.hpp"
#include "avgaudit/sensor/sensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace avgaudit::cli {

// Flags shared by all commands. Flags override config-file values.
struct GlobalOptions {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool force = false;
    int threads = 1;
};

// Config file (or defaults) with flag overrides applied.
ExperimentConfig resolve_config(const GlobalOptions& options);

// In-memory synthetic pipeline: defect maps, class signals and images.
struct SyntheticData {
    std::vector<sensor::DefectMap> maps;
    std::vector<sensor::AgeSignal> signals;
    LabeledDataset dataset;
};

SyntheticData generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

// dataset_root when set, otherwise the synthetic block generated in memory.
LabeledDataset load_dataset(const ExperimentConfig& config);

// Each command returns the process exit code; errors propagate as exceptions.
int cmd_generate(const ExperimentConfig& config, bool force, std::ostream& log);

struct TrainOptions {
    std::optional<int> stop_after;   // total epochs after which to stop and save
    bool resume = false;             // continue from existing checkpoints
};
int cmd_train(const ExperimentConfig& config, bool force, const TrainOptions& options, std::ostream& log);

struct AuditOptions {
    std::optional<int> runs;
    std::optional<int> sets;
    bool export_averages = false;   // AVGI rasters of run 0
    bool export_png = false;        // plus clipped 8-bit previews (lossy)
};
int cmd_audit(const ExperimentConfig& config, bool force, const AuditOptions& options, std::ostream& log);

struct InspectOptions {
    double threshold = 10.0;
    bool diff = false;                       // second input's hits absent from the first
    std::optional<std::string> csv_out;
};
int cmd_inspect(const std::vector<std::string>& paths, const InspectOptions& options, std::ostream& out);

// Adapter protocol server for a checkpoint directory: reads the manifest,
// scores each raster (inputs are taken as already preprocessed) and writes
// the scores CSV.
int cmd_predict(const std::filesystem::path& model_dir, const std::filesystem::path& manifest,
                const std::filesystem::path& scores_out, learn::FusionRule fusion);

// Loads model_<pos>.tnet files of a directory into one ensemble.
std::shared_ptr<const learn::Classifier> load_checkpoint_classifier(const std::filesystem::path& dir,
                                                                    learn::FusionRule fusion);

// Name of class directory k out of K (zero-padded so names sort numerically).
std::string class_dir_name(int k, int num_classes);

} // namespace avgaudit::cli
