#pragma once

#include "avgaudit/core/image.hpp"
#include "avgaudit/core/rng.hpp"
#include "avgaudit/filters/kernel.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avgaudit::learn {

// First-layer treatment of the input patch.
//   raw:          no front layer, the body sees scaled pixels
//   constrained:  trainable K x k x k residual layer, projected after every step
//   fixed_bank:   fixed high-pass bank, each kernel summed over input channels
enum class FrontEnd { raw, constrained, fixed_bank };

std::string_view to_string(FrontEnd f) noexcept;
std::optional<FrontEnd> parse_front_end(std::string_view name) noexcept;

// ---------------------------------------------------------------------------
// TinyNetArch: desk-scale classifier layout.
//
//   input patch (C channels) * input_scale
//   [front end]                       valid k x k, no bias, no activation
//   conv1: body_channels1, 3x3, s=1   valid, bias, ReLU
//   conv2: body_channels2, 3x3, s=2   valid, bias, ReLU
//   global average pooling
//   fully connected -> num_classes logits, softmax scores
//
// All convolutions are "valid", so a constant input gives exactly zero
// response after a zero-sum front end.
// ---------------------------------------------------------------------------
struct TinyNetArch {
    FrontEnd front_end = FrontEnd::constrained;
    int in_channels = 1;
    int num_classes = 2;
    int front_kernels = 3;
    int front_size = 5;
    int body_channels1 = 8;
    int body_channels2 = 16;
    double input_scale = 1.0 / 255.0;
    // fixed_bank only: filter-bank text (parse_filter_bank format).
    std::string bank_text;

    void validate() const;
    // Smallest patch side the layout accepts.
    int min_input_size() const;

    friend bool operator==(const TinyNetArch&, const TinyNetArch&) = default;
};

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
};

class TinyNet {
public:
    // Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases; a
    // constrained front end is projected right after initialization.
    TinyNet(const TinyNetArch& arch, Rng& init_rng);
    // Adopts given parameters (checkpoint load). Throws FormatError on a size mismatch.
    TinyNet(const TinyNetArch& arch, std::vector<double> parameters);

    const TinyNetArch& arch() const noexcept { return arch_; }
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
    const ParamBlock& block(std::string_view name) const;

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::vector<double> logits(const Image& patch) const;
    // Softmax probabilities.
    std::vector<double> scores(const Image& patch) const;

    // Cross-entropy loss for one sample; accumulates d(loss)/d(params) into
    // `grad` (size parameter_count()). Optionally returns the probabilities.
    double loss_and_gradient(const Image& patch, int label, std::span<double> grad,
                             std::vector<double>* probabilities = nullptr) const;

    // Re-projects every constrained front-end slice; no-op for other front
    // ends. Returns how many slices had to be redrawn.
    int project_constraints(Rng* rng);

    // Largest violation of centre == -1 / off-centre sum == 1 over all
    // constrained slices (0 for other front ends).
    double constraint_violation() const;

    // Bound of the Glorot init for the front layer (used for redraws).
    double front_init_bound() const;

private:
    struct Workspace;

    void layout();
    void forward(const Image& patch, Workspace& ws) const;

    TinyNetArch arch_;
    std::vector<ParamBlock> blocks_;
    std::vector<double> params_;
    std::vector<double> bank_weights_;   // fixed_bank front end, [K][C][k][k]
    int bank_kernels_ = 0;
    int bank_size_ = 0;
};

// Numerically stable softmax cross-entropy.
double softmax_cross_entropy(std::span<const double> logits, int label);
std::vector<double> softmax(std::span<const double> logits);

} // namespace avgaudit::learn
