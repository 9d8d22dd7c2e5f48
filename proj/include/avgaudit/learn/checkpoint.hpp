#pragma once

#include "avgaudit/learn/classifier.hpp"
#include "avgaudit/learn/optimizer.hpp"
#include "avgaudit/learn/patches.hpp"
#include "avgaudit/learn/tinynet.hpp"
#include "avgaudit/learn/training.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace avgaudit::learn {

// Exact training state for continuing an interrupted run. Parameters are
// stored as float64 here; the regular f32 blocks alone would round them.
struct ResumeState {
    std::vector<double> parameters;
    OptimizerState optimizer;
    std::vector<EpochStats> history;
};

struct Checkpoint {
    TinyNet net;
    std::uint64_t seed = 0;
    PatchPosition position = PatchPosition::ce;
    int patch_size = 256;
    Preprocess preprocess = Preprocess::none;
    std::optional<ResumeState> resume;
};

// Layout (all integers little-endian):
//   "TNET", u32 version, u32 header length, JSON header,
//   f32 parameter blocks in declaration order,
//   optional resume section: "RSUM", u32 JSON length, JSON, f64 arrays
//   (parameters, then optimizer moments).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws FormatError on a bad magic, version, header or length.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json arch_to_json(const TinyNetArch& arch);
TinyNetArch arch_from_json(const nlohmann::json& j);

} // namespace avgaudit::learn
