#include "avgaudit/learn/optimizer.hpp"

#include "avgaudit/core/error.hpp"

#include <algorithm>
#include <cmath>

namespace avgaudit::learn {

namespace {

void check_sizes(std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size()) throw DataError("parameter and gradient sizes differ");
}

} // namespace

void adamax_step(std::span<double> params, std::span<const double> grads, AdamaxState& state, double lr,
                 const AdamaxConstants& c) {
    check_sizes(params, grads);
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.u.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw DataError("AdaMax state does not match the parameter count");
    ++state.step;
    const double step_size = lr / (1.0 - std::pow(c.beta1, static_cast<double>(state.step)));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.u[i] = std::max(c.beta2 * state.u[i], std::abs(grads[i]));
        params[i] -= step_size * state.m[i] / (state.u[i] + c.epsilon);
    }
}

void sgd_momentum_step(std::span<double> params, std::span<const double> grads, MomentumState& state, double lr,
                       double momentum) {
    check_sizes(params, grads);
    if (state.velocity.empty()) state.velocity.assign(params.size(), 0.0);
    if (state.velocity.size() != params.size()) throw DataError("momentum state does not match the parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.velocity[i] = momentum * state.velocity[i] + grads[i];
        params[i] -= lr * state.velocity[i];
    }
}

std::string_view to_string(OptimizerKind k) noexcept {
    return k == OptimizerKind::adamax ? "adamax" : "sgd_momentum";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) noexcept {
    if (name == "adamax") return OptimizerKind::adamax;
    if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
    return std::nullopt;
}

void OptimizerState::step(std::span<double> params, std::span<const double> grads, double lr) {
    if (kind == OptimizerKind::adamax) adamax_step(params, grads, adamax, lr);
    else sgd_momentum_step(params, grads, sgd, lr, momentum);
}

} // namespace avgaudit::learn
