#pragma once
// Central-difference gradient check for TinyNet, shared by the unit and
// acceptance tests.

#include "oracles.hpp"

#include "avgaudit/learn/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace gradcheck {

inline const char* kSmallBank = "a, 3, 1\n0 0 0\n1 -1 0\n0 0 0\n"
                                "b, 3, 4\n-1 2 -1\n2 -4 2\n-1 2 -1\n";

inline avgaudit::learn::TinyNetArch small_arch(avgaudit::learn::FrontEnd fe, int channels) {
    avgaudit::learn::TinyNetArch a;
    a.front_end = fe;
    a.in_channels = channels;
    a.num_classes = 3;
    a.body_channels1 = 4;
    a.body_channels2 = 5;
    a.input_scale = 0.01;
    if (fe == avgaudit::learn::FrontEnd::fixed_bank) a.bank_text = kSmallBank;
    return a;
}

inline double l2(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

// Relative error ||fd - analytic|| / max(||fd||, ||analytic||) per parameter
// tensor, step 1e-3, summed loss over 10 random patches.
inline std::vector<std::pair<std::string, double>> relative_errors(avgaudit::learn::FrontEnd fe, int channels, int size) {
    using namespace avgaudit;
    learn::TinyNetArch arch = small_arch(fe, channels);
    Rng rng(17);
    learn::TinyNet net(arch, rng);
    // ReLU has a kink at 0 and a 1e-3 step that crosses one measures the jump,
    // not the slope. Keep every pre-activation far from 0: small inputs, and
    // conv biases of alternating sign that dominate (so half the channels are
    // live and half are dead). Nothing else about the point is special.
    const double b1 = 0.2;
    const double b2 = 1.5;
    for (const auto& b : net.blocks()) {
        const double mag = b.name == "conv1.bias" ? b1 : b.name == "conv2.bias" ? b2 : 0.0;
        if (mag > 0)
            for (std::size_t i = 0; i < b.count; ++i) net.parameters()[b.offset + i] = i % 2 ? -mag : mag;
    }
    std::vector<Image> xs;
    std::vector<int> ys;
    for (unsigned s = 0; s < 10; ++s) {
        xs.push_back(oracle::random_image(size, size, channels, 500 + s, 0.0, 1.0));
        ys.push_back(static_cast<int>(s % 3));
    }
    auto total_loss = [&] {
        double L = 0;
        std::vector<double> scratch(net.parameter_count());
        for (std::size_t s = 0; s < xs.size(); ++s) L += net.loss_and_gradient(xs[s], ys[s], scratch);
        return L;
    };
    std::vector<double> analytic(net.parameter_count(), 0.0);
    for (std::size_t s = 0; s < xs.size(); ++s) net.loss_and_gradient(xs[s], ys[s], analytic);

    const double h = 1e-3;
    std::vector<std::pair<std::string, double>> out;
    for (const auto& b : net.blocks()) {
        std::vector<double> a(analytic.begin() + b.offset, analytic.begin() + b.offset + b.count), fd(b.count), diff(b.count);
        for (std::size_t i = 0; i < b.count; ++i) {
            double& p = net.parameters()[b.offset + i];
            const double keep = p;
            p = keep + h;
            const double up = total_loss();
            p = keep - h;
            const double down = total_loss();
            p = keep;
            fd[i] = (up - down) / (2 * h);
            diff[i] = fd[i] - a[i];
        }
        out.emplace_back(b.name, l2(diff) / std::max({l2(a), l2(fd), 1e-12}));
    }
    return out;
}

} // namespace gradcheck
