#include "avgaudit/sensor/sensor.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"
#include "avgaudit/filters/median.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace avgaudit::sensor {

void DefectMap::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0) throw DataError("defect map needs positive sensor dimensions");
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& d : entries) {
        if (d.row < 0 || d.row >= height || d.col < 0 || d.col >= width || d.channel < 0 || d.channel >= channels)
            throw DataError("defect at (" + std::to_string(d.row) + "," + std::to_string(d.col) + "," +
                            std::to_string(d.channel) + ") lies outside the sensor");
        if (!(d.dark_current >= 0.0) || !(d.offset >= 0.0) || !std::isfinite(d.dark_current) || !std::isfinite(d.offset))
            throw DataError("defect dark current and offset must be finite and nonnegative");
        if (!seen.emplace(d.row, d.col, d.channel).second)
            throw DataError("duplicate defect at (" + std::to_string(d.row) + "," + std::to_string(d.col) + "," +
                            std::to_string(d.channel) + ")");
    }
}

bool DefectMap::contains(int row, int col, int channel) const noexcept {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const Defect& d) { return d.row == row && d.col == col && d.channel == channel; });
}

const char* to_string(Provenance p) noexcept {
    return p == Provenance::simulated ? "simulated" : "estimated-from-frames";
}

Image simulate_dark_frame(const DefectMap& defects, const CaptureParams& params, Rng& rng) {
    defects.validate();
    if (!(params.tau > 0.0) || !std::isfinite(params.tau)) throw ConfigError("tau must be finite and positive");
    if (!(params.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
    Image frame(defects.height, defects.width, defects.channels, 0.0);
    for (const auto& d : defects.entries) frame.at(d.row, d.col, d.channel) = params.tau * d.dark_current + d.offset;
    if (params.noise_sigma > 0.0)
        for (double& v : frame.pixels()) v += rng.normal(0.0, params.noise_sigma);
    for (double& v : frame.pixels()) v = std::max(v, 0.0);
    return frame;
}

AgeSignal estimate_age_signal(std::span<const Image> frames, int class_label) {
    if (frames.empty()) throw DataError("age signal estimation needs at least one dark frame");
    const Image& first = frames.front();
    Image theta(first.height(), first.width(), first.channels(), 0.0);
    auto acc = theta.pixels();
    for (const auto& f : frames) {
        if (!f.same_shape(first)) throw DataError("dark frames differ in shape");
        const auto px = f.pixels();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += px[i];
    }
    const double n = static_cast<double>(frames.size());
    for (double& v : acc) v /= n;
    return AgeSignal{std::move(theta), class_label, Provenance::estimated_from_frames};
}

Image embed_age_signal(const Image& content, const AgeSignal& signal) {
    if (!content.same_shape(signal.theta))
        throw DataError("content " + std::to_string(content.height()) + "x" + std::to_string(content.width()) + "x" +
                        std::to_string(content.channels()) + " does not match age signal " +
                        std::to_string(signal.theta.height()) + "x" + std::to_string(signal.theta.width()) + "x" +
                        std::to_string(signal.theta.channels()) + "; expand the content first");
    Image out = content;
    auto dst = out.pixels();
    const auto add = signal.theta.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
    return out;
}

Image mirror_expand(const Image& content, int target_height, int target_width) {
    const int h = content.height(), w = content.width();
    if (target_height < h || target_width < w)
        throw DataError("mirror_expand target " + std::to_string(target_height) + "x" + std::to_string(target_width) +
                        " is smaller than the content " + std::to_string(h) + "x" + std::to_string(w));
    const int top = (target_height - h) / 2, left = (target_width - w) / 2;
    const int bottom = target_height - h - top, right = target_width - w - left;
    if (std::max(top, bottom) > h || std::max(left, right) > w)
        throw DataError("mirror_expand would need more than one reflection per side");
    Image out(target_height, target_width, content.channels());
    for (int i = 0; i < target_height; ++i) {
        const int si = mirror_index(i - top, h);
        for (int j = 0; j < target_width; ++j) {
            const int sj = mirror_index(j - left, w);
            for (int c = 0; c < content.channels(); ++c) out.at(i, j, c) = content.at(si, sj, c);
        }
    }
    return out;
}

std::vector<DefectHit> detect_strong_defects(const Image& avg, double threshold) {
    const Image smooth = filters::median_filter(avg, 5);
    std::vector<DefectHit> hits;
    for (int i = 0; i < avg.height(); ++i)
        for (int j = 0; j < avg.width(); ++j)
            for (int c = 0; c < avg.channels(); ++c) {
                const double r = std::abs(avg.at(i, j, c) - smooth.at(i, j, c));
                if (r > threshold) hits.push_back(DefectHit{i, j, c, r});
            }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const DefectHit& a, const DefectHit& b) { return a.magnitude > b.magnitude; });
    return hits;
}

std::vector<DefectHit> new_defects(const std::vector<DefectHit>& earlier, const std::vector<DefectHit>& later) {
    std::set<std::tuple<int, int, int>> old;
    for (const auto& h : earlier) old.emplace(h.row, h.col, h.channel);
    std::vector<DefectHit> out;
    for (const auto& h : later)
        if (!old.contains({h.row, h.col, h.channel})) out.push_back(h);
    return out;
}

void save_defect_map(const DefectMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "row,col,channel,D,c\n";
    char buf[64];
    auto num = [&](double v) {
        auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    };
    for (const auto& d : map.entries)
        out << d.row << ',' << d.col << ',' << d.channel << ',' << num(d.dark_current) << ',' << num(d.offset) << '\n';
}

DefectMap load_defect_map(const std::filesystem::path& path, int height, int width, int channels) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open defect map '" + path.string() + "'");
    DefectMap map{height, width, channels, {}};
    std::string line;
    if (!std::getline(in, line) || line.rfind("row,col,channel,D,c", 0) != 0)
        throw FormatError("'" + path.string() + "': missing 'row,col,channel,D,c' header");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (f.size() != 5) throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected 5 fields");
        try {
            map.entries.push_back(Defect{std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stod(f[4])});
        } catch (const std::exception&) {
            throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) + ": bad number");
        }
    }
    map.validate();
    return map;
}

void save_age_signal(const AgeSignal& signal, const std::filesystem::path& raster_path) {
    save_float_raster(signal.theta, raster_path);
    auto sidecar = raster_path;
    sidecar.replace_extension(".json");
    std::ofstream out(sidecar, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + sidecar.string() + "'");
    const nlohmann::json j{{"class", signal.class_label}, {"provenance", to_string(signal.provenance)}};
    out << j.dump(2) << '\n';
}

AgeSignal load_age_signal(const std::filesystem::path& raster_path) {
    AgeSignal s;
    s.theta = load_float_raster(raster_path);
    auto sidecar = raster_path;
    sidecar.replace_extension(".json");
    std::ifstream in(sidecar);
    if (!in) throw FormatError("missing age-signal sidecar '" + sidecar.string() + "'");
    try {
        const auto j = nlohmann::json::parse(in);
        s.class_label = j.at("class").get<int>();
        const auto prov = j.at("provenance").get<std::string>();
        if (prov == "simulated") s.provenance = Provenance::simulated;
        else if (prov == "estimated-from-frames") s.provenance = Provenance::estimated_from_frames;
        else throw FormatError("unknown provenance '" + prov + "'");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + sidecar.string() + "': " + e.what());
    }
    return s;
}

} // namespace avgaudit::sensor
