#include "avgaudit/learn/tinynet.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/filters/constrained.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace avgaudit::learn {

std::string_view to_string(FrontEnd f) noexcept {
    switch (f) {
    case FrontEnd::raw: return "raw";
    case FrontEnd::constrained: return "constrained";
    case FrontEnd::fixed_bank: return "fixed_bank";
    }
    return "?";
}

std::optional<FrontEnd> parse_front_end(std::string_view name) noexcept {
    if (name == "raw") return FrontEnd::raw;
    if (name == "constrained") return FrontEnd::constrained;
    if (name == "fixed_bank") return FrontEnd::fixed_bank;
    return std::nullopt;
}

void TinyNetArch::validate() const {
    if (in_channels < 1) throw ConfigError("in_channels must be positive");
    if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
    if (body_channels1 < 1 || body_channels2 < 1) throw ConfigError("body channel counts must be positive");
    if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw ConfigError("input_scale must be positive");
    if (front_end == FrontEnd::constrained) {
        if (front_kernels < 1) throw ConfigError("constrained front end needs at least one kernel");
        if (front_size < 3 || front_size % 2 == 0) throw ConfigError("constrained kernel size must be odd and >= 3");
    }
    if (front_end == FrontEnd::fixed_bank && bank_text.empty()) throw ConfigError("fixed_bank front end needs a filter bank");
}

int TinyNetArch::min_input_size() const {
    int front = 1;
    if (front_end == FrontEnd::constrained) front = front_size;
    else if (front_end == FrontEnd::fixed_bank) front = filters::parse_filter_bank(bank_text, "bank").kernel_size();
    // front (valid) -> conv1 3x3 -> conv2 3x3 needs at least 3 rows left.
    return front - 1 + 2 + 3;
}

namespace {

// Planar activation tensor [c][h][w].
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    void reset(int channels, int height, int width) {
        c = channels;
        h = height;
        w = width;
        v.assign(static_cast<std::size_t>(c) * h * w, 0.0);
    }
    double* plane(int ch) noexcept { return v.data() + static_cast<std::size_t>(ch) * h * w; }
    const double* plane(int ch) const noexcept { return v.data() + static_cast<std::size_t>(ch) * h * w; }
};

// Valid cross-correlation. W is [out][in][k][k]; bias may be null.
void conv_forward(const Tensor& in, const double* W, const double* bias, int out_c, int k, int stride, Tensor& out) {
    const int ho = (in.h - k) / stride + 1, wo = (in.w - k) / stride + 1;
    out.reset(out_c, ho, wo);
    for (int o = 0; o < out_c; ++o) {
        double* dst = out.plane(o);
        if (bias) std::fill(dst, dst + static_cast<std::size_t>(ho) * wo, bias[o]);
        for (int ci = 0; ci < in.c; ++ci) {
            const double* src = in.plane(ci);
            const double* wk = W + (static_cast<std::size_t>(o) * in.c + ci) * k * k;
            for (int m = 0; m < k; ++m)
                for (int n = 0; n < k; ++n) {
                    const double wv = wk[m * k + n];
                    if (wv == 0.0) continue;
                    for (int i = 0; i < ho; ++i) {
                        const double* s = src + static_cast<std::size_t>(i * stride + m) * in.w + n;
                        double* d = dst + static_cast<std::size_t>(i) * wo;
                        if (stride == 1)
                            for (int j = 0; j < wo; ++j) d[j] += wv * s[j];
                        else
                            for (int j = 0; j < wo; ++j) d[j] += wv * s[j * stride];
                    }
                }
        }
    }
}

// Gradients of a valid convolution given d(out). Accumulates into dW/db;
// writes d(in) when requested.
void conv_backward(const Tensor& in, const double* W, const Tensor& dout, int k, int stride, double* dW, double* db,
                   Tensor* din) {
    const int ho = dout.h, wo = dout.w;
    if (din) din->reset(in.c, in.h, in.w);
    std::vector<double> row_acc(static_cast<std::size_t>(wo));
    for (int o = 0; o < dout.c; ++o) {
        const double* g = dout.plane(o);
        if (db) {
            double s = 0.0;
            for (std::size_t p = 0; p < static_cast<std::size_t>(ho) * wo; ++p) s += g[p];
            db[o] += s;
        }
        for (int ci = 0; ci < in.c; ++ci) {
            const double* src = in.plane(ci);
            const std::size_t base = (static_cast<std::size_t>(o) * in.c + ci) * k * k;
            for (int m = 0; m < k; ++m)
                for (int n = 0; n < k; ++n) {
                    // Element-wise accumulation over rows, one horizontal sum
                    // at the end: keeps the inner loop vectorizable.
                    std::fill(row_acc.begin(), row_acc.end(), 0.0);
                    for (int i = 0; i < ho; ++i) {
                        const double* s = src + static_cast<std::size_t>(i * stride + m) * in.w + n;
                        const double* gr = g + static_cast<std::size_t>(i) * wo;
                        if (stride == 1)
                            for (int j = 0; j < wo; ++j) row_acc[static_cast<std::size_t>(j)] += gr[j] * s[j];
                        else
                            for (int j = 0; j < wo; ++j) row_acc[static_cast<std::size_t>(j)] += gr[j] * s[j * stride];
                    }
                    dW[base + static_cast<std::size_t>(m) * k + n] += std::accumulate(row_acc.begin(), row_acc.end(), 0.0);

                    if (din) {
                        const double wv = W[base + static_cast<std::size_t>(m) * k + n];
                        if (wv == 0.0) continue;
                        double* dplane = din->plane(ci);
                        for (int i = 0; i < ho; ++i) {
                            double* d = dplane + static_cast<std::size_t>(i * stride + m) * in.w + n;
                            const double* gr = g + static_cast<std::size_t>(i) * wo;
                            if (stride == 1)
                                for (int j = 0; j < wo; ++j) d[j] += wv * gr[j];
                            else
                                for (int j = 0; j < wo; ++j) d[j * stride] += wv * gr[j];
                        }
                    }
                }
        }
    }
}

void relu_inplace(Tensor& t) {
    for (double& v : t.v) v = v > 0.0 ? v : 0.0;
}

void relu_mask(const Tensor& activated, Tensor& grad) {
    for (std::size_t i = 0; i < grad.v.size(); ++i)
        if (!(activated.v[i] > 0.0)) grad.v[i] = 0.0;
}

} // namespace

struct TinyNet::Workspace {
    Tensor x0, front, a1, a2;
    std::vector<double> pooled, logits;
};

std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
    for (double& v : p) v /= sum;
    return p;
}

double softmax_cross_entropy(std::span<const double> logits, int label) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    return std::log(sum) + mx - logits[static_cast<std::size_t>(label)];
}

TinyNet::TinyNet(const TinyNetArch& arch, Rng& init_rng) : arch_(arch) {
    layout();
    for (const auto& b : blocks_) {
        const bool is_bias = b.name.ends_with(".bias");
        if (is_bias) continue;  // zero
        int fan_in = 0, fan_out = 0;
        if (b.shape.size() == 4) {
            fan_in = b.shape[1] * b.shape[2] * b.shape[3];
            fan_out = b.shape[0] * b.shape[2] * b.shape[3];
        } else {
            fan_in = b.shape[1];
            fan_out = b.shape[0];
        }
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < b.count; ++i) params_[b.offset + i] = init_rng.uniform(-bound, bound);
    }
    project_constraints(&init_rng);
}

TinyNet::TinyNet(const TinyNetArch& arch, std::vector<double> parameters) : arch_(arch) {
    layout();
    if (parameters.size() != params_.size())
        throw FormatError("parameter count " + std::to_string(parameters.size()) + " does not match the architecture (" +
                          std::to_string(params_.size()) + ")");
    for (double v : parameters)
        if (!std::isfinite(v)) throw FormatError("non-finite parameter");
    params_ = std::move(parameters);
}

void TinyNet::layout() {
    arch_.validate();
    blocks_.clear();
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
        std::size_t count = 1;
        for (int s : shape) count *= static_cast<std::size_t>(s);
        blocks_.push_back(ParamBlock{std::move(name), std::move(shape), offset, count});
        offset += count;
    };

    int body_in = arch_.in_channels;
    if (arch_.front_end == FrontEnd::constrained) {
        add("front.weight", {arch_.front_kernels, arch_.in_channels, arch_.front_size, arch_.front_size});
        body_in = arch_.front_kernels;
    } else if (arch_.front_end == FrontEnd::fixed_bank) {
        const auto bank = filters::parse_filter_bank(arch_.bank_text, "bank");
        bank_kernels_ = static_cast<int>(bank.count());
        bank_size_ = bank.kernel_size();
        const std::size_t kk = static_cast<std::size_t>(bank_size_) * bank_size_;
        bank_weights_.assign(static_cast<std::size_t>(bank_kernels_) * arch_.in_channels * kk, 0.0);
        for (int o = 0; o < bank_kernels_; ++o) {
            const auto taps = bank.entries[static_cast<std::size_t>(o)].kernel.slice(0);
            for (int ci = 0; ci < arch_.in_channels; ++ci)
                std::copy(taps.begin(), taps.end(),
                          bank_weights_.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(o) * arch_.in_channels + ci) * kk));
        }
        body_in = bank_kernels_;
    }
    add("conv1.weight", {arch_.body_channels1, body_in, 3, 3});
    add("conv1.bias", {arch_.body_channels1});
    add("conv2.weight", {arch_.body_channels2, arch_.body_channels1, 3, 3});
    add("conv2.bias", {arch_.body_channels2});
    add("fc.weight", {arch_.num_classes, arch_.body_channels2});
    add("fc.bias", {arch_.num_classes});
    params_.assign(offset, 0.0);
}

const ParamBlock& TinyNet::block(std::string_view name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return b;
    throw DataError("no parameter block '" + std::string(name) + "'");
}

void TinyNet::forward(const Image& patch, Workspace& ws) const {
    if (patch.channels() != arch_.in_channels)
        throw DataError("patch has " + std::to_string(patch.channels()) + " channels, network expects " +
                        std::to_string(arch_.in_channels));
    const int need = arch_.min_input_size();
    if (patch.height() < need || patch.width() < need)
        throw DataError("patch " + std::to_string(patch.height()) + "x" + std::to_string(patch.width()) +
                        " is below the network minimum of " + std::to_string(need));

    const int h = patch.height(), w = patch.width(), c = patch.channels();
    ws.x0.reset(c, h, w);
    const auto px = patch.pixels();
    for (int ch = 0; ch < c; ++ch) {
        double* dst = ws.x0.plane(ch);
        for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) dst[p] = px[p * c + ch] * arch_.input_scale;
    }

    const Tensor* body_in = &ws.x0;
    if (arch_.front_end == FrontEnd::constrained) {
        const auto& fb = blocks_[0];
        conv_forward(ws.x0, params_.data() + fb.offset, nullptr, arch_.front_kernels, arch_.front_size, 1, ws.front);
        body_in = &ws.front;
    } else if (arch_.front_end == FrontEnd::fixed_bank) {
        conv_forward(ws.x0, bank_weights_.data(), nullptr, bank_kernels_, bank_size_, 1, ws.front);
        body_in = &ws.front;
    }

    const auto& w1 = block("conv1.weight");
    const auto& b1 = block("conv1.bias");
    const auto& w2 = block("conv2.weight");
    const auto& b2 = block("conv2.bias");
    const auto& wf = block("fc.weight");
    const auto& bf = block("fc.bias");

    conv_forward(*body_in, params_.data() + w1.offset, params_.data() + b1.offset, arch_.body_channels1, 3, 1, ws.a1);
    relu_inplace(ws.a1);
    conv_forward(ws.a1, params_.data() + w2.offset, params_.data() + b2.offset, arch_.body_channels2, 3, 2, ws.a2);
    relu_inplace(ws.a2);

    const std::size_t area = static_cast<std::size_t>(ws.a2.h) * ws.a2.w;
    ws.pooled.assign(static_cast<std::size_t>(arch_.body_channels2), 0.0);
    for (int ch = 0; ch < arch_.body_channels2; ++ch) {
        const double* p = ws.a2.plane(ch);
        ws.pooled[static_cast<std::size_t>(ch)] = std::accumulate(p, p + area, 0.0) / static_cast<double>(area);
    }
    ws.logits.assign(static_cast<std::size_t>(arch_.num_classes), 0.0);
    for (int k = 0; k < arch_.num_classes; ++k) {
        double z = params_[bf.offset + static_cast<std::size_t>(k)];
        for (int ch = 0; ch < arch_.body_channels2; ++ch)
            z += params_[wf.offset + static_cast<std::size_t>(k) * arch_.body_channels2 + ch] * ws.pooled[static_cast<std::size_t>(ch)];
        ws.logits[static_cast<std::size_t>(k)] = z;
    }
}

std::vector<double> TinyNet::logits(const Image& patch) const {
    Workspace ws;
    forward(patch, ws);
    return ws.logits;
}

std::vector<double> TinyNet::scores(const Image& patch) const {
    return softmax(logits(patch));
}

double TinyNet::loss_and_gradient(const Image& patch, int label, std::span<double> grad,
                                  std::vector<double>* probabilities) const {
    if (grad.size() != params_.size()) throw DataError("gradient buffer size does not match the parameter count");
    if (label < 0 || label >= arch_.num_classes) throw DataError("label outside the network's class range");
    Workspace ws;
    forward(patch, ws);
    const double loss = softmax_cross_entropy(ws.logits, label);
    auto p = softmax(ws.logits);

    const auto& w1 = block("conv1.weight");
    const auto& b1 = block("conv1.bias");
    const auto& w2 = block("conv2.weight");
    const auto& b2 = block("conv2.bias");
    const auto& wf = block("fc.weight");
    const auto& bf = block("fc.bias");
    const int c2 = arch_.body_channels2;

    std::vector<double> dz = p;
    dz[static_cast<std::size_t>(label)] -= 1.0;
    std::vector<double> dpooled(static_cast<std::size_t>(c2), 0.0);
    for (int k = 0; k < arch_.num_classes; ++k) {
        const double d = dz[static_cast<std::size_t>(k)];
        grad[bf.offset + static_cast<std::size_t>(k)] += d;
        for (int ch = 0; ch < c2; ++ch) {
            const std::size_t wi = wf.offset + static_cast<std::size_t>(k) * c2 + ch;
            grad[wi] += d * ws.pooled[static_cast<std::size_t>(ch)];
            dpooled[static_cast<std::size_t>(ch)] += params_[wi] * d;
        }
    }

    Tensor da2;
    da2.reset(c2, ws.a2.h, ws.a2.w);
    const std::size_t area = static_cast<std::size_t>(ws.a2.h) * ws.a2.w;
    for (int ch = 0; ch < c2; ++ch) {
        const double g = dpooled[static_cast<std::size_t>(ch)] / static_cast<double>(area);
        std::fill(da2.plane(ch), da2.plane(ch) + area, g);
    }
    relu_mask(ws.a2, da2);

    Tensor da1;
    conv_backward(ws.a1, params_.data() + w2.offset, da2, 3, 2, grad.data() + w2.offset, grad.data() + b2.offset, &da1);
    relu_mask(ws.a1, da1);

    const Tensor& body_in = arch_.front_end == FrontEnd::raw ? ws.x0 : ws.front;
    if (arch_.front_end == FrontEnd::constrained) {
        Tensor dfront;
        conv_backward(body_in, params_.data() + w1.offset, da1, 3, 1, grad.data() + w1.offset, grad.data() + b1.offset, &dfront);
        const auto& fb = blocks_[0];
        conv_backward(ws.x0, params_.data() + fb.offset, dfront, arch_.front_size, 1, grad.data() + fb.offset, nullptr, nullptr);
    } else {
        conv_backward(body_in, params_.data() + w1.offset, da1, 3, 1, grad.data() + w1.offset, grad.data() + b1.offset, nullptr);
    }

    if (probabilities) *probabilities = std::move(p);
    return loss;
}

double TinyNet::front_init_bound() const {
    const int k = arch_.front_size;
    const int body_in = arch_.front_end == FrontEnd::constrained ? arch_.front_kernels : 1;
    return std::sqrt(6.0 / (arch_.in_channels * k * k + body_in * k * k));
}

int TinyNet::project_constraints(Rng* rng) {
    if (arch_.front_end != FrontEnd::constrained) return 0;
    const auto& fb = blocks_[0];
    const std::size_t kk = static_cast<std::size_t>(arch_.front_size) * arch_.front_size;
    int redrawn = 0;
    for (std::size_t s = 0; s < fb.count / kk; ++s) {
        std::span<double> slice(params_.data() + fb.offset + s * kk, kk);
        if (filters::project_constrained_slice(slice, arch_.front_size, rng, front_init_bound())) ++redrawn;
    }
    return redrawn;
}

double TinyNet::constraint_violation() const {
    if (arch_.front_end != FrontEnd::constrained) return 0.0;
    const auto& fb = blocks_[0];
    const int k = arch_.front_size;
    const std::size_t kk = static_cast<std::size_t>(k) * k;
    const std::size_t centre = static_cast<std::size_t>(k / 2) * k + k / 2;
    double worst = 0.0;
    for (std::size_t s = 0; s < fb.count / kk; ++s) {
        const double* w = params_.data() + fb.offset + s * kk;
        double off = 0.0;
        for (std::size_t i = 0; i < kk; ++i)
            if (i != centre) off += w[i];
        worst = std::max({worst, std::abs(w[centre] + 1.0), std::abs(off - 1.0)});
    }
    return worst;
}

} // namespace avgaudit::learn
