#pragma once

#include "avgaudit/audit/audit.hpp"
#include "avgaudit/learn/classifier.hpp"
#include "avgaudit/learn/patches.hpp"
#include "avgaudit/learn/training.hpp"
#include "avgaudit/sensor/sensor.hpp"
#include "avgaudit/sensor/synthetic.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace avgaudit::cli {

struct SyntheticConfig {
    int num_classes = 2;
    int content_count = 400;
    int height = 256;
    int width = 256;
    int channels = 1;
    sensor::SyntheticOptions options;
    sensor::DefectPlan defects;
    sensor::CaptureParams capture;
    // 0: the signal is the noise-free sensor response tau*D + c; otherwise
    // it is estimated from this many simulated dark frames per class.
    int dark_frames = 0;
    int png_bit_depth = 8;

    friend bool operator==(const SyntheticConfig&, const SyntheticConfig&);
};

enum class ModelType { tinynet, checkpoint, external };

struct ModelConfig {
    ModelType type = ModelType::tinynet;
    // tinynet: raw | residual | constrained | fixed_bank
    std::string variant = "constrained";
    int front_kernels = 3;
    int front_size = 5;
    int body_channels1 = 8;
    int body_channels2 = 16;
    double input_scale = 1.0 / 255.0;
    std::string bank_path;          // fixed_bank; empty = bundled bank
    std::string checkpoint_dir;     // checkpoint: directory with model_<pos>.tnet
    std::string command;            // external: whitespace-separated argv
    learn::Preprocess preprocess = learn::Preprocess::none;   // external only
    bool block_mode = false;        // classify via 48 blocks of 500x500, majority vote

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output = "out";
    std::string dataset_root;                  // PNG class tree; empty = use `synthetic`
    std::optional<SyntheticConfig> synthetic;
    ModelConfig model;
    learn::TrainConfig train;
    audit::AuditConfig audit;
    learn::PatchSpec patches;
    learn::FusionRule fusion = learn::FusionRule::score_sum;
    double soft_threshold = 0.05;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

nlohmann::json to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys and bad values are ConfigErrors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Structural checks plus existence of every referenced path.
void validate_config(const ExperimentConfig& config);

// TinyNet layout and input transform of a tinynet model spec.
learn::TinyNetArch make_arch(const ModelConfig& model, int in_channels, int num_classes);
learn::Preprocess model_preprocess(const ModelConfig& model);

} // namespace avgaudit::cli
