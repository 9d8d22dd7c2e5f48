#include "avgaudit/learn/checkpoint.hpp"

#include "avgaudit/core/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace avgaudit::learn {

using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

class Reader {
public:
    Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw FormatError("checkpoint '" + path_ + "' is truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const noexcept { return pos_ == data_.size(); }
    const std::string& path() const noexcept { return path_; }

private:
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

json parse_json(const std::string& text, const std::string& path) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + path + "' has a malformed header: " + e.what());
    }
}

} // namespace

json arch_to_json(const TinyNetArch& a) {
    json j;
    j["front_end"] = std::string(to_string(a.front_end));
    j["in_channels"] = a.in_channels;
    j["num_classes"] = a.num_classes;
    j["front_kernels"] = a.front_kernels;
    j["front_size"] = a.front_size;
    j["body_channels1"] = a.body_channels1;
    j["body_channels2"] = a.body_channels2;
    j["input_scale"] = a.input_scale;
    if (a.front_end == FrontEnd::fixed_bank) j["bank_text"] = a.bank_text;
    return j;
}

TinyNetArch arch_from_json(const json& j) {
    try {
        TinyNetArch a;
        const auto fe = parse_front_end(j.at("front_end").get<std::string>());
        if (!fe) throw FormatError("unknown front end '" + j.at("front_end").get<std::string>() + "'");
        a.front_end = *fe;
        a.in_channels = j.at("in_channels").get<int>();
        a.num_classes = j.at("num_classes").get<int>();
        a.front_kernels = j.at("front_kernels").get<int>();
        a.front_size = j.at("front_size").get<int>();
        a.body_channels1 = j.at("body_channels1").get<int>();
        a.body_channels2 = j.at("body_channels2").get<int>();
        a.input_scale = j.at("input_scale").get<double>();
        if (j.contains("bank_text")) a.bank_text = j.at("bank_text").get<std::string>();
        return a;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad architecture description: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const auto& net = ck.net;
    json header;
    header["arch"] = arch_to_json(net.arch());
    header["num_classes"] = net.arch().num_classes;
    header["seed"] = ck.seed;
    header["patch"] = {{"position", std::string(to_string(ck.position))}, {"size", ck.patch_size}};
    header["preprocess"] = std::string(to_string(ck.preprocess));
    json blocks = json::array();
    for (const auto& b : net.blocks()) blocks.push_back({{"name", b.name}, {"shape", b.shape}});
    header["blocks"] = blocks;

    std::string out = "TNET";
    put_u32(out, kCheckpointVersion);
    const std::string text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (double v : net.parameters()) put_f32(out, v);

    if (ck.resume) {
        const auto& r = *ck.resume;
        if (r.parameters.size() != net.parameter_count()) throw DataError("resume parameters do not match the network");
        json meta;
        meta["optimizer"] = std::string(to_string(r.optimizer.kind));
        meta["momentum"] = r.optimizer.momentum;
        meta["adamax_step"] = r.optimizer.adamax.step;
        meta["adamax_moments"] = !r.optimizer.adamax.m.empty();
        meta["velocity"] = !r.optimizer.sgd.velocity.empty();
        json hist = json::array();
        for (const auto& e : r.history)
            hist.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss},
                            {"train_accuracy", e.train_accuracy}, {"validation_accuracy", e.validation_accuracy}});
        meta["history"] = hist;
        out += "RSUM";
        const std::string mt = meta.dump(-1, ' ', false, json::error_handler_t::strict);
        put_u32(out, static_cast<std::uint32_t>(mt.size()));
        out += mt;
        for (double v : r.parameters) put_f64(out, v);
        for (double v : r.optimizer.adamax.m) put_f64(out, v);
        for (double v : r.optimizer.adamax.u) put_f64(out, v);
        for (double v : r.optimizer.sgd.velocity) put_f64(out, v);
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint '" + path.string() + "'");
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint '" + path.string() + "'");
    const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    Reader rd(data, path.string());

    if (rd.bytes(4) != "TNET") throw FormatError("'" + path.string() + "' is not a TNET checkpoint");
    const auto version = rd.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");
    const json header = parse_json(rd.bytes(rd.u32()), rd.path());

    TinyNetArch arch;
    std::uint64_t seed = 0;
    PatchPosition position{};
    int patch_size = 0;
    Preprocess preprocess{};
    try {
        arch = arch_from_json(header.at("arch"));
        seed = header.at("seed").get<std::uint64_t>();
        const auto pos = parse_position(header.at("patch").at("position").get<std::string>());
        const auto pre = parse_preprocess(header.at("preprocess").get<std::string>());
        if (!pos || !pre) throw FormatError("checkpoint '" + path.string() + "' has an unknown patch position or preprocess");
        position = *pos;
        preprocess = *pre;
        patch_size = header.at("patch").at("size").get<int>();
    } catch (const json::exception& e) {
        throw FormatError("checkpoint '" + path.string() + "' header: " + e.what());
    }

    // Size from the architecture, not from the header block list.
    Rng scratch(0);
    const std::size_t count = TinyNet(arch, scratch).parameter_count();
    std::vector<double> params(count);
    for (double& v : params) v = rd.f32();

    std::optional<ResumeState> resume;
    if (!rd.at_end()) {
        if (rd.bytes(4) != "RSUM") throw FormatError("checkpoint '" + path.string() + "' has trailing data");
        const json meta = parse_json(rd.bytes(rd.u32()), rd.path());
        ResumeState r;
        try {
            const auto kind = parse_optimizer(meta.at("optimizer").get<std::string>());
            if (!kind) throw FormatError("unknown optimizer in checkpoint");
            r.optimizer.kind = *kind;
            r.optimizer.momentum = meta.at("momentum").get<double>();
            r.optimizer.adamax.step = meta.at("adamax_step").get<std::int64_t>();
            for (const auto& e : meta.at("history"))
                r.history.push_back(EpochStats{e.at("epoch").get<int>(), e.at("lr").get<double>(),
                                               e.at("train_loss").get<double>(), e.at("train_accuracy").get<double>(),
                                               e.at("validation_accuracy").get<double>()});
            r.parameters.resize(count);
            for (double& v : r.parameters) v = rd.f64();
            if (meta.at("adamax_moments").get<bool>()) {
                r.optimizer.adamax.m.resize(count);
                r.optimizer.adamax.u.resize(count);
                for (double& v : r.optimizer.adamax.m) v = rd.f64();
                for (double& v : r.optimizer.adamax.u) v = rd.f64();
            }
            if (meta.at("velocity").get<bool>()) {
                r.optimizer.sgd.velocity.resize(count);
                for (double& v : r.optimizer.sgd.velocity) v = rd.f64();
            }
        } catch (const json::exception& e) {
            throw FormatError("checkpoint '" + path.string() + "' resume section: " + e.what());
        }
        if (!rd.at_end()) throw FormatError("checkpoint '" + path.string() + "' has trailing data");
        resume = std::move(r);
    }

    return Checkpoint{TinyNet(arch, std::move(params)), seed, position, patch_size, preprocess, std::move(resume)};
}

} // namespace avgaudit::learn
