#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace avgaudit::learn {

// Standard AdaMax constants (not tunable from configs).
struct AdamaxConstants {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamaxState {
    std::vector<double> m;   // first moment
    std::vector<double> u;   // exponentially weighted infinity norm
    std::int64_t step = 0;

    friend bool operator==(const AdamaxState&, const AdamaxState&) = default;
};

// m <- b1*m + (1-b1)*g;  u <- max(b2*u, |g|);
// p <- p - lr / (1 - b1^t) * m / (u + eps)
void adamax_step(std::span<double> params, std::span<const double> grads, AdamaxState& state, double lr,
                 const AdamaxConstants& constants = {});

struct MomentumState {
    std::vector<double> velocity;

    friend bool operator==(const MomentumState&, const MomentumState&) = default;
};

// v <- momentum*v + g;  p <- p - lr*v
void sgd_momentum_step(std::span<double> params, std::span<const double> grads, MomentumState& state, double lr,
                       double momentum);

enum class OptimizerKind { adamax, sgd_momentum };

std::string_view to_string(OptimizerKind k) noexcept;
std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept;

// Tagged optimizer state used by the training loop and checkpoints.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adamax;
    double momentum = 0.0;
    AdamaxState adamax;
    MomentumState sgd;

    void step(std::span<double> params, std::span<const double> grads, double lr);

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

} // namespace avgaudit::learn
