#include "avgaudit/sensor/synthetic.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

namespace avgaudit::sensor {

namespace {

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

} // namespace

Image generate_content(int height, int width, int channels, const ContentStyle& style, Rng& rng) {
    Image img(height, width, channels);

    std::vector<double> from(static_cast<std::size_t>(channels)), to(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        from[static_cast<std::size_t>(c)] = rng.uniform(style.color_low, style.color_high);
        to[static_cast<std::size_t>(c)] = rng.uniform(style.color_low, style.color_high);
    }
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double dx = std::cos(angle), dy = std::sin(angle);
    // Projection of the four corners bounds t to [0,1].
    double pmin = 0.0, pmax = 0.0;
    for (int corner = 0; corner < 4; ++corner) {
        const double p = (corner & 1 ? width - 1 : 0) * dx + (corner & 2 ? height - 1 : 0) * dy;
        pmin = corner == 0 ? p : std::min(pmin, p);
        pmax = corner == 0 ? p : std::max(pmax, p);
    }
    const double span = std::max(pmax - pmin, 1.0);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            const double t = (j * dx + i * dy - pmin) / span;
            for (int c = 0; c < channels; ++c)
                img.at(i, j, c) = from[static_cast<std::size_t>(c)] +
                                  (to[static_cast<std::size_t>(c)] - from[static_cast<std::size_t>(c)]) * t;
        }

    const int shapes = style.min_shapes +
                       static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(std::max(0, style.max_shapes - style.min_shapes) + 1)));
    const double min_dim = std::min(height, width);
    const double edge = std::max(style.edge_width, 1e-6);
    std::vector<double> colour(static_cast<std::size_t>(channels));
    for (int s = 0; s < shapes; ++s) {
        const bool ellipse = rng.uniform() < 0.5;
        const double cy = rng.uniform(0.0, height), cx = rng.uniform(0.0, width);
        const double ry = rng.uniform(min_dim / 16.0, min_dim / 4.0);
        const double rx = rng.uniform(min_dim / 16.0, min_dim / 4.0);
        for (auto& v : colour) v = rng.uniform(style.color_low, style.color_high);
        const int i0 = std::max(0, static_cast<int>(cy - ry - edge - 1)), i1 = std::min(height - 1, static_cast<int>(cy + ry + edge + 1));
        const int j0 = std::max(0, static_cast<int>(cx - rx - edge - 1)), j1 = std::min(width - 1, static_cast<int>(cx + rx + edge + 1));
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) {
                const double ux = j - cx, uy = i - cy;
                double dist;  // signed distance to the outline in pixels, negative inside
                if (ellipse) dist = (std::hypot(ux / rx, uy / ry) - 1.0) * std::min(rx, ry);
                else dist = std::max(std::abs(ux) - rx, std::abs(uy) - ry);
                const double alpha = 1.0 - smoothstep(-edge / 2.0, edge / 2.0, dist);
                if (alpha <= 0.0) continue;
                for (int c = 0; c < channels; ++c) {
                    double& p = img.at(i, j, c);
                    p += alpha * (colour[static_cast<std::size_t>(c)] - p);
                }
            }
    }

    for (double& v : img.pixels()) {
        if (style.texture_sigma > 0.0) v += rng.normal(0.0, style.texture_sigma);
        v = std::clamp(v, style.value_low, style.value_high);
    }
    return img;
}

std::vector<DefectMap> plan_defect_maps(int num_classes, int height, int width, int channels,
                                        const DefectPlan& plan, Rng& rng) {
    if (num_classes < 1) throw ConfigError("need at least one class");
    if (plan.base_count < 0 || plan.added_per_class < 0) throw ConfigError("defect counts must be nonnegative");
    const int inner_h = height - 2 * plan.margin, inner_w = width - 2 * plan.margin;
    const long long total = plan.base_count + static_cast<long long>(plan.added_per_class) * (num_classes - 1);
    if (inner_h <= 0 || inner_w <= 0 || total > static_cast<long long>(inner_h) * inner_w * channels / 4)
        throw ConfigError("too many defects for the sensor area");

    std::set<std::tuple<int, int, int>> used;
    auto draw = [&](int count, std::vector<Defect>& out) {
        for (int n = 0; n < count;) {
            const int r = plan.margin + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(inner_h)));
            const int c = plan.margin + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(inner_w)));
            const int ch = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(channels)));
            const double d = rng.uniform(plan.dark_current_low, plan.dark_current_high);
            const double off = rng.uniform(plan.offset_low, plan.offset_high);
            if (!used.emplace(r, c, ch).second) continue;
            out.push_back(Defect{r, c, ch, d, off});
            ++n;
        }
    };

    std::vector<DefectMap> maps;
    DefectMap current{height, width, channels, {}};
    draw(plan.base_count, current.entries);
    maps.push_back(current);
    for (int k = 1; k < num_classes; ++k) {
        draw(plan.added_per_class, current.entries);
        maps.push_back(current);
    }
    return maps;
}

std::vector<AgeSignal> estimate_signals_from_dark_frames(const std::vector<DefectMap>& maps,
                                                         const CaptureParams& params, int frame_count,
                                                         const Rng& rng) {
    if (frame_count < 1) throw ConfigError("need at least one dark frame per class");
    std::vector<AgeSignal> out;
    for (std::size_t k = 0; k < maps.size(); ++k) {
        std::vector<Image> frames(static_cast<std::size_t>(frame_count));
        parallel_for(frames.size(), [&](std::size_t f) {
            Rng frame_rng = rng.derive("dark-frame", k * 100000u + f);
            frames[f] = simulate_dark_frame(maps[k], params, frame_rng);
        });
        out.push_back(estimate_age_signal(frames, static_cast<int>(k)));
    }
    return out;
}

LabeledDataset generate_synthetic_dataset(int content_count, const std::vector<AgeSignal>& signals,
                                          const SyntheticOptions& options, const Rng& rng, std::string name) {
    if (signals.size() < 2) throw ConfigError("synthetic generation needs at least two class signals");
    if (content_count < 1) throw ConfigError("content_count must be at least 1");
    const Image& ref = signals.front().theta;
    for (const auto& s : signals)
        if (!s.theta.same_shape(ref)) throw DataError("class age signals differ in shape");
    if (!options.class_brightness.empty() && options.class_brightness.size() != signals.size())
        throw ConfigError("class_brightness needs one value per class");

    const int h = ref.height(), w = ref.width(), c = ref.channels();
    const int ch = options.content_height > 0 ? options.content_height : h;
    const int cw = options.content_width > 0 ? options.content_width : w;

    Image prnu;
    if (options.prnu_sigma > 0.0) {
        Rng prnu_rng = rng.derive("prnu");
        prnu = Image(h, w, c);
        for (double& v : prnu.pixels()) v = prnu_rng.normal(0.0, options.prnu_sigma);
    }

    std::vector<Image> contents(static_cast<std::size_t>(content_count));
    parallel_for(contents.size(), [&](std::size_t i) {
        Rng content_rng = rng.derive("content", i);
        Image img = generate_content(ch, cw, c, options.style, content_rng);
        if (ch != h || cw != w) img = mirror_expand(img, h, w);
        if (!prnu.empty()) {
            auto px = img.pixels();
            const auto k = prnu.pixels();
            for (std::size_t p = 0; p < px.size(); ++p) px[p] += px[p] * k[p];
        }
        contents[i] = std::move(img);
    });

    const int digits = static_cast<int>(std::to_string(content_count - 1).size());
    std::vector<DatasetItem> items;
    items.reserve(contents.size() * signals.size());
    for (std::size_t k = 0; k < signals.size(); ++k) {
        const double shift = options.class_brightness.empty() ? 0.0 : options.class_brightness[k];
        for (std::size_t i = 0; i < contents.size(); ++i) {
            Image img = embed_age_signal(contents[i], signals[k]);
            if (shift != 0.0)
                for (double& v : img.pixels()) v += shift;
            std::string idx = std::to_string(i);
            idx.insert(0, static_cast<std::size_t>(std::max(0, digits - static_cast<int>(idx.size()))), '0');
            items.push_back(DatasetItem{"class_" + std::to_string(k) + "/" + idx,
                                        std::make_shared<const Image>(std::move(img)), static_cast<int>(k), Split::train});
        }
    }
    return LabeledDataset(std::move(items), static_cast<int>(signals.size()), std::move(name));
}

} // namespace avgaudit::sensor
