#include "avgaudit/cli/config.hpp"

#include "avgaudit/core/error.hpp"
#include "avgaudit/filters/kernel.hpp"
#include "avgaudit/learn/external_classifier.hpp"

#include <fstream>
#include <set>

namespace avgaudit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view to_string(ModelType t) {
    switch (t) {
    case ModelType::tinynet: return "tinynet";
    case ModelType::checkpoint: return "checkpoint";
    case ModelType::external: return "external";
    }
    return "?";
}

// Reads keys from one JSON object, rejecting anything it was not asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
    }
    ~Section() = default;

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("'" + path_ + "." + key + "' has the wrong type");
        }
    }
    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& at(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }
    std::string child(const char* key) const { return path_ + "." + key; }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + path_ + "." + it.key() + "'");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json synthetic_to_json(const SyntheticConfig& s) {
    const auto& st = s.options.style;
    const auto& d = s.defects;
    return json{
        {"num_classes", s.num_classes},
        {"content_count", s.content_count},
        {"height", s.height},
        {"width", s.width},
        {"channels", s.channels},
        {"content_height", s.options.content_height},
        {"content_width", s.options.content_width},
        {"class_brightness", s.options.class_brightness},
        {"prnu_sigma", s.options.prnu_sigma},
        {"style",
         {{"color_low", st.color_low}, {"color_high", st.color_high}, {"min_shapes", st.min_shapes},
          {"max_shapes", st.max_shapes}, {"edge_width", st.edge_width}, {"texture_sigma", st.texture_sigma},
          {"value_low", st.value_low}, {"value_high", st.value_high}}},
        {"defects",
         {{"base_count", d.base_count}, {"added_per_class", d.added_per_class},
          {"dark_current_low", d.dark_current_low}, {"dark_current_high", d.dark_current_high},
          {"offset_low", d.offset_low}, {"offset_high", d.offset_high}, {"margin", d.margin}}},
        {"capture", {{"tau", s.capture.tau}, {"noise_sigma", s.capture.noise_sigma}}},
        {"dark_frames", s.dark_frames},
        {"png_bit_depth", s.png_bit_depth},
    };
}

SyntheticConfig synthetic_from_json(const json& j) {
    SyntheticConfig s;
    Section sec(j, "synthetic");
    sec.get("num_classes", s.num_classes);
    sec.get("content_count", s.content_count);
    sec.get("height", s.height);
    sec.get("width", s.width);
    sec.get("channels", s.channels);
    sec.get("content_height", s.options.content_height);
    sec.get("content_width", s.options.content_width);
    sec.get("class_brightness", s.options.class_brightness);
    sec.get("prnu_sigma", s.options.prnu_sigma);
    sec.get("dark_frames", s.dark_frames);
    sec.get("png_bit_depth", s.png_bit_depth);
    if (sec.has("style")) {
        auto& st = s.options.style;
        Section x(sec.at("style"), "synthetic.style");
        x.get("color_low", st.color_low);
        x.get("color_high", st.color_high);
        x.get("min_shapes", st.min_shapes);
        x.get("max_shapes", st.max_shapes);
        x.get("edge_width", st.edge_width);
        x.get("texture_sigma", st.texture_sigma);
        x.get("value_low", st.value_low);
        x.get("value_high", st.value_high);
        x.finish();
    }
    if (sec.has("defects")) {
        auto& d = s.defects;
        Section x(sec.at("defects"), "synthetic.defects");
        x.get("base_count", d.base_count);
        x.get("added_per_class", d.added_per_class);
        x.get("dark_current_low", d.dark_current_low);
        x.get("dark_current_high", d.dark_current_high);
        x.get("offset_low", d.offset_low);
        x.get("offset_high", d.offset_high);
        x.get("margin", d.margin);
        x.finish();
    }
    if (sec.has("capture")) {
        Section x(sec.at("capture"), "synthetic.capture");
        x.get("tau", s.capture.tau);
        x.get("noise_sigma", s.capture.noise_sigma);
        x.finish();
    }
    sec.finish();
    return s;
}

template <typename E, typename Parse>
E parse_enum(const std::string& text, Parse parse, const std::string& what) {
    const auto v = parse(text);
    if (!v) throw ConfigError("unknown " + what + " '" + text + "'");
    return *v;
}

} // namespace

bool operator==(const SyntheticConfig& a, const SyntheticConfig& b) {
    return synthetic_to_json(a) == synthetic_to_json(b);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return to_json(a) == to_json(b);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["output"] = c.output;
    j["dataset_root"] = c.dataset_root;
    if (c.synthetic) j["synthetic"] = synthetic_to_json(*c.synthetic);

    const auto& m = c.model;
    j["model"] = json{{"type", std::string(to_string(m.type))},
                      {"variant", m.variant},
                      {"front_kernels", m.front_kernels},
                      {"front_size", m.front_size},
                      {"body_channels1", m.body_channels1},
                      {"body_channels2", m.body_channels2},
                      {"input_scale", m.input_scale},
                      {"bank_path", m.bank_path},
                      {"checkpoint_dir", m.checkpoint_dir},
                      {"command", m.command},
                      {"preprocess", std::string(learn::to_string(m.preprocess))},
                      {"block_mode", m.block_mode}};

    json schedule = json::array();
    for (const auto& s : c.train.schedule) schedule.push_back(json::array({s.epoch, s.lr}));
    j["train"] = json{{"optimizer", std::string(learn::to_string(c.train.optimizer))},
                      {"lr", c.train.lr},
                      {"momentum", c.train.momentum},
                      {"schedule", schedule},
                      {"epochs", c.train.epochs},
                      {"batch_size", c.train.batch_size}};

    json positions = json::array();
    for (auto p : c.patches.positions) positions.push_back(std::string(learn::to_string(p)));
    j["audit"] = json{{"num_runs", c.audit.num_runs},
                      {"num_sets", c.audit.num_sets},
                      {"fraction", c.audit.fraction},
                      {"split", c.audit.split},
                      {"patch_size", c.patches.size},
                      {"positions", positions},
                      {"fusion", std::string(learn::to_string(c.fusion))},
                      {"soft_threshold", c.soft_threshold}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Section top(j, "config");
    top.get("seed", c.seed);
    top.get("output", c.output);
    top.get("dataset_root", c.dataset_root);
    if (top.has("synthetic") && !top.at("synthetic").is_null()) c.synthetic = synthetic_from_json(top.at("synthetic"));

    if (top.has("model")) {
        auto& m = c.model;
        Section x(top.at("model"), "model");
        std::string type = "tinynet", pre = "none";
        x.get("type", type);
        if (type == "tinynet") m.type = ModelType::tinynet;
        else if (type == "checkpoint") m.type = ModelType::checkpoint;
        else if (type == "external") m.type = ModelType::external;
        else throw ConfigError("unknown model type '" + type + "'");
        x.get("variant", m.variant);
        x.get("front_kernels", m.front_kernels);
        x.get("front_size", m.front_size);
        x.get("body_channels1", m.body_channels1);
        x.get("body_channels2", m.body_channels2);
        x.get("input_scale", m.input_scale);
        x.get("bank_path", m.bank_path);
        x.get("checkpoint_dir", m.checkpoint_dir);
        x.get("command", m.command);
        x.get("preprocess", pre);
        m.preprocess = parse_enum<learn::Preprocess>(pre, learn::parse_preprocess, "preprocess");
        x.get("block_mode", m.block_mode);
        x.finish();
    }

    if (top.has("train")) {
        auto& t = c.train;
        Section x(top.at("train"), "train");
        std::string opt(learn::to_string(t.optimizer));
        x.get("optimizer", opt);
        t.optimizer = parse_enum<learn::OptimizerKind>(opt, learn::parse_optimizer, "optimizer");
        x.get("lr", t.lr);
        x.get("momentum", t.momentum);
        x.get("epochs", t.epochs);
        x.get("batch_size", t.batch_size);
        if (x.has("schedule")) {
            const auto& s = x.at("schedule");
            if (!s.is_array()) throw ConfigError("'train.schedule' must be a list of [epoch, lr] pairs");
            for (const auto& e : s) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number())
                    throw ConfigError("'train.schedule' entries must be [epoch, lr]");
                t.schedule.push_back(learn::LrStep{e[0].get<int>(), e[1].get<double>()});
            }
        }
        x.finish();
    }

    if (top.has("audit")) {
        Section x(top.at("audit"), "audit");
        x.get("num_runs", c.audit.num_runs);
        x.get("num_sets", c.audit.num_sets);
        x.get("fraction", c.audit.fraction);
        x.get("split", c.audit.split);
        x.get("patch_size", c.patches.size);
        if (x.has("positions")) {
            std::vector<std::string> names;
            x.get("positions", names);
            c.patches.positions.clear();
            for (const auto& n : names)
                c.patches.positions.push_back(parse_enum<learn::PatchPosition>(n, learn::parse_position, "patch position"));
        }
        std::string fusion(learn::to_string(c.fusion));
        x.get("fusion", fusion);
        c.fusion = parse_enum<learn::FusionRule>(fusion, learn::parse_fusion, "fusion rule");
        x.get("soft_threshold", c.soft_threshold);
        x.finish();
    }
    top.finish();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

learn::Preprocess model_preprocess(const ModelConfig& m) {
    if (m.type == ModelType::external) return m.preprocess;
    return m.variant == "residual" ? learn::Preprocess::median_residual : learn::Preprocess::none;
}

learn::TinyNetArch make_arch(const ModelConfig& m, int in_channels, int num_classes) {
    learn::TinyNetArch a;
    if (m.variant == "raw" || m.variant == "residual") a.front_end = learn::FrontEnd::raw;
    else if (m.variant == "constrained") a.front_end = learn::FrontEnd::constrained;
    else if (m.variant == "fixed_bank") a.front_end = learn::FrontEnd::fixed_bank;
    else throw ConfigError("unknown tinynet variant '" + m.variant + "' (raw, residual, constrained, fixed_bank)");
    a.in_channels = in_channels;
    a.num_classes = num_classes;
    a.front_kernels = m.front_kernels;
    a.front_size = m.front_size;
    a.body_channels1 = m.body_channels1;
    a.body_channels2 = m.body_channels2;
    a.input_scale = m.input_scale;
    if (a.front_end == learn::FrontEnd::fixed_bank)
        a.bank_text = m.bank_path.empty() ? filters::srm_filter_bank().source_text
                                          : filters::load_filter_bank(m.bank_path).source_text;
    a.validate();
    return a;
}

void validate_config(const ExperimentConfig& c) {
    if (c.output.empty()) throw ConfigError("output directory is empty");
    if (c.dataset_root.empty() && !c.synthetic) throw ConfigError("config needs either dataset_root or a synthetic block");
    if (!c.dataset_root.empty() && !fs::is_directory(c.dataset_root))
        throw ConfigError("dataset_root '" + c.dataset_root + "' does not exist");
    if (c.synthetic) {
        const auto& s = *c.synthetic;
        if (s.num_classes < 2) throw ConfigError("synthetic.num_classes must be at least 2");
        if (s.content_count < 1) throw ConfigError("synthetic.content_count must be at least 1");
        if (s.height < 5 || s.width < 5) throw ConfigError("synthetic images must be at least 5x5");
        if (s.channels != 1 && s.channels != 3) throw ConfigError("synthetic.channels must be 1 or 3");
        if (s.png_bit_depth != 8 && s.png_bit_depth != 16) throw ConfigError("png_bit_depth must be 8 or 16");
        if (s.dark_frames < 0) throw ConfigError("dark_frames must be non-negative");
        if (!(s.capture.tau > 0.0) || !(s.capture.noise_sigma >= 0.0)) throw ConfigError("capture needs tau > 0 and noise_sigma >= 0");
    }

    const auto& m = c.model;
    switch (m.type) {
    case ModelType::tinynet:
        if (!m.bank_path.empty() && !fs::exists(m.bank_path)) throw ConfigError("bank_path '" + m.bank_path + "' does not exist");
        make_arch(m, 1, 2);  // validates the variant and bank
        break;
    case ModelType::checkpoint:
        if (m.checkpoint_dir.empty() || !fs::is_directory(m.checkpoint_dir))
            throw ConfigError("model checkpoint directory '" + m.checkpoint_dir + "' does not exist");
        break;
    case ModelType::external: {
        const auto argv = learn::split_command(m.command);
        if (argv.empty()) throw ConfigError("external model needs a command");
        if (argv[0].find('/') != std::string::npos && !fs::exists(argv[0]))
            throw ConfigError("external command '" + argv[0] + "' does not exist");
        break;
    }
    }
    c.train.validate();
    c.audit.validate();
    c.patches.validate();
    if (!(c.soft_threshold >= 0.0)) throw ConfigError("soft_threshold must be non-negative");
}

} // namespace avgaudit::cli
