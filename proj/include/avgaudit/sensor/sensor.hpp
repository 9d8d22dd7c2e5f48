#pragma once

#include "avgaudit/core/image.hpp"
#include "avgaudit/core/rng.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace avgaudit::sensor {

// One defective sensor element: dark current D and fixed offset c.
struct Defect {
    int row = 0;
    int col = 0;
    int channel = 0;
    double dark_current = 0.0;
    double offset = 0.0;

    friend bool operator==(const Defect&, const Defect&) = default;
};

// ---------------------------------------------------------------------------
// DefectMap: additive in-field defects of one sensor at one point in time.
// Invariants: coordinates in range, D >= 0, c >= 0, no duplicate
// (row, col, channel). Checked by validate().
// ---------------------------------------------------------------------------
struct DefectMap {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<Defect> entries;

    void validate() const;
    bool contains(int row, int col, int channel) const noexcept;
};

// Exposure/ISO/temperature folded into tau; noise_sigma is the standard
// deviation of the random part of the other noise sources.
struct CaptureParams {
    double tau = 1.0;
    double noise_sigma = 0.0;
};

enum class Provenance { simulated, estimated_from_frames };

const char* to_string(Provenance p) noexcept;

struct AgeSignal {
    Image theta;
    int class_label = 0;
    Provenance provenance = Provenance::estimated_from_frames;
};

// Dark-field frame with the light term zero: tau*D + c at defect sites plus
// i.i.d. N(0, noise_sigma) everywhere, clamped at 0 from below.
Image simulate_dark_frame(const DefectMap& defects, const CaptureParams& params, Rng& rng);

// Per-pixel mean of the frames. Throws DataError for an empty list or
// mismatched shapes.
AgeSignal estimate_age_signal(std::span<const Image> frames, int class_label);

// content + theta, unclipped. Throws DataError on shape mismatch.
Image embed_age_signal(const Image& content, const AgeSignal& signal);

// Symmetric edge-inclusive reflection padding around centred content
// (top/left padding = floor((target - size) / 2)). At most one reflection per
// side, so the target may not exceed 3x the content. Throws DataError otherwise.
Image mirror_expand(const Image& content, int target_height, int target_width);

struct DefectHit {
    int row = 0;
    int col = 0;
    int channel = 0;
    double magnitude = 0.0;   // |avg - median5(avg)| at the hit

    friend bool operator==(const DefectHit&, const DefectHit&) = default;
};

// Pixels whose 5x5 median residual exceeds threshold, strongest first
// (ties ordered by row, col, channel).
std::vector<DefectHit> detect_strong_defects(const Image& avg, double threshold);

// Hits of `later` with no hit at the same coordinate in `earlier`.
std::vector<DefectHit> new_defects(const std::vector<DefectHit>& earlier, const std::vector<DefectHit>& later);

// ---------------------------------------------------------------------------
// File forms.
//   DefectMap: CSV with header "row,col,channel,D,c".
//   AgeSignal: AVGI raster plus a JSON sidecar {"class":k,"provenance":"..."}
//              at the same path with extension ".json".
// ---------------------------------------------------------------------------
void save_defect_map(const DefectMap& map, const std::filesystem::path& path);
DefectMap load_defect_map(const std::filesystem::path& path, int height, int width, int channels);

void save_age_signal(const AgeSignal& signal, const std::filesystem::path& raster_path);
AgeSignal load_age_signal(const std::filesystem::path& raster_path);

} // namespace avgaudit::sensor
