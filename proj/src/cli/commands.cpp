#include "avgaudit/cli/commands.hpp"

#include "avgaudit/audit/report.hpp"
#include "avgaudit/core/error.hpp"
#include "avgaudit/core/image_io.hpp"
#include "avgaudit/core/parallel.hpp"
#include "avgaudit/learn/checkpoint.hpp"
#include "avgaudit/learn/external_classifier.hpp"
#include "avgaudit/sensor/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace avgaudit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write '" + path.string() + "'");
    os << text;
    if (!os) throw DataError("failed writing '" + path.string() + "'");
}

// Refuses to write into a non-empty directory unless forced.
void prepare_output(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigError("output '" + dir.string() + "' is not a directory");
        if (!fs::is_empty(dir) && !force)
            throw ConfigError("output directory '" + dir.string() + "' is not empty (use --force to overwrite)");
    }
    fs::create_directories(dir);
}

std::string pad(std::size_t v, std::size_t count) {
    std::string s = std::to_string(v);
    const std::size_t digits = std::to_string(count > 0 ? count - 1 : 0).size();
    if (s.size() < digits) s.insert(0, digits - s.size(), '0');
    return s;
}

std::string fmt(double v) { return audit::format_number(v); }

// Same items with their images preprocessed (shared when unchanged).
std::vector<LabeledImage> preprocessed_pool(const LabeledDataset& ds, learn::Preprocess pre) {
    std::vector<LabeledImage> pool(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        const auto& it = ds.items()[i];
        auto img = pre == learn::Preprocess::none ? it.image
                                                  : std::make_shared<const Image>(learn::apply_preprocess(*it.image, pre));
        pool[i] = LabeledImage{it.id, std::move(img), it.label};
    });
    return pool;
}

std::string curve_rows(const std::string& prefix, const std::vector<learn::EpochStats>& history) {
    std::string out;
    for (const auto& e : history)
        out += prefix + std::to_string(e.epoch) + "," + fmt(e.lr) + "," + fmt(e.train_loss) + "," +
               fmt(e.train_accuracy) + "," + fmt(e.validation_accuracy) + "\n";
    return out;
}

} // namespace

std::string class_dir_name(int k, int num_classes) {
    return "class_" + pad(static_cast<std::size_t>(k), static_cast<std::size_t>(num_classes));
}

ExperimentConfig resolve_config(const GlobalOptions& o) {
    ExperimentConfig c = o.config_path ? load_config(*o.config_path) : ExperimentConfig{};
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.output = *o.out;
    return c;
}

SyntheticData generate_synthetic(const SyntheticConfig& s, std::uint64_t seed) {
    const Rng master(seed);
    Rng map_rng = master.derive("defect-maps");
    auto maps = sensor::plan_defect_maps(s.num_classes, s.height, s.width, s.channels, s.defects, map_rng);

    std::vector<sensor::AgeSignal> signals;
    if (s.dark_frames > 0) {
        signals = sensor::estimate_signals_from_dark_frames(maps, s.capture, s.dark_frames, master.derive("dark-frames"));
    } else {
        // Noise-free response: exactly tau*D + c at every defect.
        sensor::CaptureParams clean = s.capture;
        clean.noise_sigma = 0.0;
        for (std::size_t k = 0; k < maps.size(); ++k) {
            Rng quiet = master.derive("dark-frames", k);
            signals.push_back(sensor::AgeSignal{sensor::simulate_dark_frame(maps[k], clean, quiet), static_cast<int>(k),
                                                sensor::Provenance::simulated});
        }
    }
    auto dataset = sensor::generate_synthetic_dataset(s.content_count, signals, s.options, master.derive("content"));
    return SyntheticData{std::move(maps), std::move(signals), std::move(dataset)};
}

LabeledDataset load_dataset(const ExperimentConfig& c) {
    if (!c.dataset_root.empty()) {
        int k = 0;
        auto items = load_image_tree(c.dataset_root, &k);
        std::vector<DatasetItem> out;
        out.reserve(items.size());
        for (auto& it : items) out.push_back(DatasetItem{std::move(it.id), std::move(it.image), it.label, Split::train});
        return LabeledDataset(std::move(out), k, fs::path(c.dataset_root).filename().string());
    }
    if (!c.synthetic) throw ConfigError("config needs either dataset_root or a synthetic block");
    return generate_synthetic(*c.synthetic, c.seed).dataset;
}

int cmd_generate(const ExperimentConfig& c, bool force, std::ostream& log) {
    if (!c.synthetic) throw ConfigError("generate needs a synthetic block in the config");
    validate_config(c);
    const auto& s = *c.synthetic;
    const fs::path out = c.output;
    prepare_output(out, force);

    const auto data = generate_synthetic(s, c.seed);
    const int K = s.num_classes;
    fs::create_directories(out / "signals");
    fs::create_directories(out / "defects");

    // One directory per class; files named by content index.
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < data.dataset.size(); ++i)
        by_class[static_cast<std::size_t>(data.dataset.items()[i].label)].push_back(i);

    std::atomic<std::size_t> clipped{0};
    json classes = json::array();
    for (int k = 0; k < K; ++k) {
        const std::string dir = class_dir_name(k, K);
        // class trees live under images/ so that directory is a dataset_root
        fs::create_directories(out / "images" / dir);
        const auto& idx = by_class[static_cast<std::size_t>(k)];
        parallel_for(idx.size(), [&](std::size_t j) {
            const auto& item = data.dataset.items()[idx[j]];
            clipped += save_png(*item.image, out / "images" / dir / (pad(j, idx.size()) + ".png"), s.png_bit_depth);
        });
        const std::string signal = "signals/" + dir + ".avgi";
        const std::string defects = "defects/" + dir + ".csv";
        sensor::save_age_signal(data.signals[static_cast<std::size_t>(k)], out / signal);
        sensor::save_defect_map(data.maps[static_cast<std::size_t>(k)], out / defects);
        classes.push_back({{"class", k}, {"dir", "images/" + dir}, {"count", idx.size()}, {"signal", signal}, {"defects", defects},
                           {"defect_count", data.maps[static_cast<std::size_t>(k)].entries.size()}});
    }

    json manifest;
    manifest["seed"] = c.seed;
    manifest["num_classes"] = K;
    manifest["height"] = s.height;
    manifest["width"] = s.width;
    manifest["channels"] = s.channels;
    manifest["png_bit_depth"] = s.png_bit_depth;
    manifest["clipped_samples"] = clipped.load();
    manifest["classes"] = classes;
    manifest["config"] = to_json(c);
    write_text(out / "manifest.json", manifest.dump(2) + "\n");

    if (clipped > 0)
        std::cerr << "warning: " << clipped.load() << " samples clipped to the " << s.png_bit_depth
                  << "-bit PNG range (in-memory values are unclipped)\n";
    log << "generated " << data.dataset.size() << " images in " << K << " classes under " << out.string() << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& c, bool force, const TrainOptions& o, std::ostream& log) {
    validate_config(c);
    if (c.model.type != ModelType::tinynet) throw ConfigError("train needs a tinynet model spec");
    if (o.stop_after && *o.stop_after < 1) throw ConfigError("--stop-after must be at least 1");
    const fs::path out = c.output;
    prepare_output(out, force || o.resume);
    if (!o.resume)
        for (auto pos : learn::kAllPositions) fs::remove(out / ("model_" + std::string(learn::to_string(pos)) + ".tnet"));

    const auto full = load_dataset(c);
    const auto pre = model_preprocess(c.model);
    const auto arch = make_arch(c.model, full.items().front().image->channels(), full.num_classes());
    Rng split_rng(derive_seed(c.seed, "train-split"));
    const auto ds = split_dataset(preprocessed_pool(full, pre), full.num_classes(), c.audit.split, split_rng, full.name());

    std::string curve = "position,epoch,lr,train_loss,train_accuracy,validation_accuracy\n";
    for (auto pos : c.patches.positions) {
        const std::string pname(learn::to_string(pos));
        const fs::path path = out / ("model_" + pname + ".tnet");
        auto tc = c.train;
        tc.seed = derive_seed(c.seed, "train", static_cast<std::uint64_t>(pos));
        auto train = learn::make_patch_set(ds, Split::train, pos, c.patches.size, learn::Preprocess::none);
        auto val = learn::make_patch_set(ds, Split::validation, pos, c.patches.size, learn::Preprocess::none);

        std::optional<learn::TrainSession> session;
        if (o.resume && fs::exists(path)) {
            auto ck = learn::load_checkpoint(path);
            if (!ck.resume) throw DataError("checkpoint '" + path.string() + "' holds no resume state");
            if (!(ck.net.arch() == arch) || ck.patch_size != c.patches.size || ck.position != pos || ck.preprocess != pre)
                throw ConfigError("checkpoint '" + path.string() + "' was trained with a different model setup");
            session.emplace(learn::TinyNet(arch, ck.resume->parameters), ck.resume->optimizer, ck.resume->history, tc,
                            std::move(train), std::move(val));
        } else {
            session.emplace(arch, tc, std::move(train), std::move(val));
        }

        while (!session->finished() && (!o.stop_after || session->epochs_done() < *o.stop_after)) {
            const auto& e = session->run_epoch();
            log << pname << " epoch " << e.epoch << ": loss " << fmt(e.train_loss) << ", train acc "
                << fmt(e.train_accuracy) << ", val acc " << fmt(e.validation_accuracy) << "\n";
        }

        learn::Checkpoint ck{session->net(), tc.seed, pos, c.patches.size, pre,
                             learn::ResumeState{std::vector<double>(session->net().parameters().begin(),
                                                                    session->net().parameters().end()),
                                                session->optimizer(), session->history()}};
        learn::save_checkpoint(path, ck);
        curve += curve_rows(pname + ",", session->history());

        if (session->finished()) {
            const auto test = learn::make_patch_set(ds, Split::test, pos, c.patches.size, learn::Preprocess::none);
            log << pname << " test accuracy " << fmt(learn::accuracy(session->net(), test)) << "\n";
        } else {
            log << pname << " stopped after " << session->epochs_done() << " of " << tc.epochs << " epochs\n";
        }
    }
    write_text(out / "training_curve.csv", curve);
    return 0;
}

std::shared_ptr<const learn::Classifier> load_checkpoint_classifier(const fs::path& dir, learn::FusionRule fusion) {
    std::map<learn::PatchPosition, learn::TinyNet> models;
    std::optional<int> size;
    std::optional<learn::Preprocess> pre;
    for (auto pos : learn::kAllPositions) {
        const fs::path p = dir / ("model_" + std::string(learn::to_string(pos)) + ".tnet");
        if (!fs::exists(p)) continue;
        auto ck = learn::load_checkpoint(p);
        if (ck.position != pos) throw DataError("checkpoint '" + p.string() + "' was trained on another position");
        if ((size && *size != ck.patch_size) || (pre && *pre != ck.preprocess))
            throw DataError("checkpoints in '" + dir.string() + "' disagree on patch size or preprocessing");
        size = ck.patch_size;
        pre = ck.preprocess;
        models.emplace(pos, std::move(ck.net));
    }
    if (models.empty()) throw ConfigError("no model_<position>.tnet checkpoints in '" + dir.string() + "'");
    return std::make_shared<learn::PatchEnsembleClassifier>(std::move(models), *size, fusion, *pre, "checkpoint");
}

int cmd_audit(const ExperimentConfig& base, bool force, const AuditOptions& o, std::ostream& log) {
    ExperimentConfig c = base;
    if (o.runs) c.audit.num_runs = *o.runs;
    if (o.sets) c.audit.num_sets = *o.sets;
    validate_config(c);
    if (c.model.block_mode && c.model.type == ModelType::tinynet)
        throw ConfigError("block_mode applies to checkpoint and external models");
    const fs::path out = c.output;
    prepare_output(out, force);

    const auto dataset = load_dataset(c);
    std::unique_ptr<audit::ModelProvider> provider;
    audit::TinyNetProvider* tiny = nullptr;
    if (c.model.type == ModelType::tinynet) {
        auto p = std::make_unique<audit::TinyNetProvider>(
            make_arch(c.model, dataset.items().front().image->channels(), dataset.num_classes()), c.train, c.patches,
            c.fusion, model_preprocess(c.model));
        tiny = p.get();
        provider = std::move(p);
    } else {
        std::shared_ptr<const learn::Classifier> clf;
        if (c.model.type == ModelType::checkpoint) clf = load_checkpoint_classifier(c.model.checkpoint_dir, c.fusion);
        else
            clf = std::make_shared<learn::ExternalClassifier>(learn::split_command(c.model.command), dataset.num_classes(),
                                                              "external", c.model.preprocess);
        if (c.model.block_mode) clf = std::make_shared<learn::BlockMajorityClassifier>(clf);
        provider = std::make_unique<audit::FixedProvider>(clf);
    }

    audit::AuditHooks hooks;
    hooks.on_progress = [&](const audit::AuditReport& r) {
        auto snapshot = r;
        snapshot.config_snapshot = to_json(c);
        audit::write_report_files(std::span<const audit::AuditReport>(&snapshot, 1), out, c.soft_threshold);
        if (!r.failure && !r.runs.empty()) {
            const auto& last = r.runs.back();
            log << "run " << last.run_index << ": acc_S " << fmt(last.acc_s) << ", averages";
            for (auto v : avg::kAllVariants)
                log << " " << avg::to_string(v) << "=" << fmt(last.acc_variant[static_cast<std::size_t>(v)]);
            log << "\n";
        }
    };
    if (o.export_averages || o.export_png) {
        fs::create_directories(out / "averages");
        hooks.on_averages = [&](int run, const avg::AveragingSet& set, const avg::VariantImages& images) {
            if (run != 0) return;
            for (auto v : avg::kAllVariants) {
                const std::string stem = "set" + pad(static_cast<std::size_t>(set.set_index), static_cast<std::size_t>(c.audit.num_sets)) +
                                         "_" + class_dir_name(set.class_label, dataset.num_classes()) + "_" +
                                         std::string(avg::to_string(v));
                save_float_raster(images[v], out / "averages" / (stem + ".avgi"));
                if (o.export_png && (images[v].channels() == 1 || images[v].channels() == 3))
                    save_png(images[v], out / "averages" / (stem + ".png"), 8);
            }
        };
    }

    const std::string imager = dataset.name().empty() ? "dataset" : dataset.name();
    try {
        audit::run_audit(dataset, *provider, c.audit, c.seed, imager, hooks);
    } catch (const std::exception&) {
        log << "audit aborted; partial report written to " << out.string() << "\n";
        throw;
    }
    if (tiny) {
        std::string curve = "run,position,epoch,lr,train_loss,train_accuracy,validation_accuracy\n";
        for (const auto& cv : tiny->curves())
            curve += curve_rows(std::to_string(cv.run_index) + "," + std::string(learn::to_string(cv.position)) + ",", cv.history);
        write_text(out / "training_curves.csv", curve);
    }
    std::ifstream findings(out / "findings.txt");
    log << findings.rdbuf();
    return 0;
}

int cmd_inspect(const std::vector<std::string>& paths, const InspectOptions& o, std::ostream& out) {
    if (paths.empty()) throw ConfigError("inspect needs at least one input");
    if (o.diff && paths.size() != 2) throw ConfigError("--diff needs exactly two inputs (earlier, later)");
    if (!(o.threshold >= 0.0)) throw ConfigError("threshold must be non-negative");

    std::vector<std::vector<sensor::DefectHit>> all_hits;
    std::string csv = "input,row,col,channel,magnitude\n";
    for (const auto& p : paths) {
        const Image img = load_any(p);
        out << p << ": " << img.height() << "x" << img.width() << "x" << img.channels() << "\n";
        for (int ch = 0; ch < img.channels(); ++ch) {
            double mn = img.at(0, 0, ch), mx = mn, sum = 0.0;
            for (int r = 0; r < img.height(); ++r)
                for (int col = 0; col < img.width(); ++col) {
                    const double v = img.at(r, col, ch);
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                    sum += v;
                }
            out << "  channel " << ch << ": min " << fmt(mn) << " max " << fmt(mx) << " mean "
                << fmt(sum / (static_cast<double>(img.height()) * img.width())) << "\n";
        }
        std::vector<sensor::DefectHit> hits;
        if (img.height() >= 5 && img.width() >= 5) hits = sensor::detect_strong_defects(img, o.threshold);
        out << "  defects above " << fmt(o.threshold) << ": " << hits.size() << "\n";
        if (!o.diff)
            for (const auto& h : hits)
                out << "    (" << h.row << ", " << h.col << ", " << h.channel << ") " << fmt(h.magnitude) << "\n";
        for (const auto& h : hits)
            csv += p + "," + std::to_string(h.row) + "," + std::to_string(h.col) + "," + std::to_string(h.channel) + "," +
                   fmt(h.magnitude) + "\n";
        all_hits.push_back(std::move(hits));
    }
    if (o.diff) {
        const auto fresh = sensor::new_defects(all_hits[0], all_hits[1]);
        out << "new defects in " << paths[1] << " relative to " << paths[0] << ": " << fresh.size() << "\n";
        for (const auto& h : fresh)
            out << "    (" << h.row << ", " << h.col << ", " << h.channel << ") " << fmt(h.magnitude) << "\n";
    }
    if (o.csv_out) write_text(*o.csv_out, csv);
    return 0;
}

int cmd_predict(const fs::path& model_dir, const fs::path& manifest, const fs::path& scores_out,
                learn::FusionRule fusion) {
    const auto clf = load_checkpoint_classifier(model_dir, fusion);
    std::ifstream is(manifest);
    if (!is) throw DataError("cannot open manifest '" + manifest.string() + "'");
    std::vector<Image> images;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        images.push_back(load_any(line));
    }
    const auto scores = clf->predict_batch(images);
    std::string csv = "index";
    for (int k = 0; k < clf->num_classes(); ++k) csv += ",score_" + std::to_string(k);
    csv += "\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        csv += std::to_string(i);
        for (double v : scores[i]) csv += "," + fmt(v);
        csv += "\n";
    }
    write_text(scores_out, csv);
    return 0;
}

} // namespace avgaudit::cli
