#pragma once

#include "avgaudit/core/dataset.hpp"
#include "avgaudit/core/rng.hpp"
#include "avgaudit/sensor/sensor.hpp"

#include <vector>

namespace avgaudit::sensor {

// ---------------------------------------------------------------------------
// Procedural content generator (stand-in for rendered frames):
//   1. linear gradient between two random colours along a random direction;
//   2. `min_shapes..max_shapes` ellipses/rectangles of random colour with a
//      smoothstep edge `edge_width` pixels wide;
//   3. i.i.d. Gaussian texture of std `texture_sigma`;
//   4. clamp to [value_low, value_high].
// Colours are drawn uniformly from [color_low, color_high] per channel.
// ---------------------------------------------------------------------------
struct ContentStyle {
    double color_low = 40.0;
    double color_high = 180.0;
    int min_shapes = 3;
    int max_shapes = 8;
    double edge_width = 2.0;
    double texture_sigma = 2.0;
    double value_low = 0.0;
    double value_high = 255.0;
};

Image generate_content(int height, int width, int channels, const ContentStyle& style, Rng& rng);

// Accumulating defect maps for K age classes: class 0 gets base_count
// defects, each later class inherits all earlier defects and adds
// added_per_class new ones. Positions are unique; D and c are uniform in
// the given ranges.
struct DefectPlan {
    int base_count = 30;
    int added_per_class = 40;
    double dark_current_low = 20.0;
    double dark_current_high = 40.0;
    double offset_low = 5.0;
    double offset_high = 15.0;
    // Defects are placed with this margin from the border, in pixels.
    int margin = 2;
};

std::vector<DefectMap> plan_defect_maps(int num_classes, int height, int width, int channels,
                                        const DefectPlan& plan, Rng& rng);

// Simulates `frame_count` dark frames per class (each from its own derived
// stream) and estimates every class's age signal from them.
std::vector<AgeSignal> estimate_signals_from_dark_frames(const std::vector<DefectMap>& maps,
                                                         const CaptureParams& params, int frame_count,
                                                         const Rng& rng);

struct SyntheticOptions {
    // Content is rendered at this size and mirror-expanded to the signal
    // size; 0 means "same as the signal".
    int content_height = 0;
    int content_width = 0;
    ContentStyle style;
    // Optional per-class additive brightness (content bias by construction).
    std::vector<double> class_brightness;
    // Optional multiplicative PRNU-like fingerprint I*K, K ~ N(0, prnu_sigma),
    // shared by all classes. Off by default.
    double prnu_sigma = 0.0;
};

// content_count content images, each emitted once per class with that
// class's signal embedded. Items are ordered class-major with ids
// "class_<k>/<index>"; all start in Split::train.
LabeledDataset generate_synthetic_dataset(int content_count, const std::vector<AgeSignal>& signals,
                                          const SyntheticOptions& options, const Rng& rng,
                                          std::string name = "synthetic");

} // namespace avgaudit::sensor
