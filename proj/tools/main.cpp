// avgaudit command-line entry point.
#include "avgaudit/cli/commands.hpp"
#include "avgaudit/core/error.hpp"
#include "avgaudit/core/parallel.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace cli = avgaudit::cli;

int main(int argc, char** argv) {
    CLI::App app{"Average-image audit of image-age classifiers"};
    app.require_subcommand(1);

    cli::GlobalOptions global;
    std::string config_path, out;
    std::uint64_t seed = 0;
    auto* opt_config = app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    auto* opt_seed = app.add_option("--seed", seed, "Master seed (overrides the config)");
    auto* opt_out = app.add_option("--out", out, "Output directory (overrides the config)");
    app.add_flag("--force", global.force, "Overwrite a non-empty output directory");
    app.add_option("--threads", global.threads, "Worker threads")->check(CLI::Range(1, 1024));

    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset tree");

    auto* train = app.add_subcommand("train", "Train TinyNet checkpoints, one per patch position");
    cli::TrainOptions train_opts;
    int stop_after = 0;
    auto* opt_stop = train->add_option("--stop-after", stop_after, "Stop (resumably) after this many epochs");
    train->add_flag("--resume", train_opts.resume, "Continue from the checkpoints in the output directory");

    auto* audit = app.add_subcommand("audit", "Run the average-image audit and write reports");
    cli::AuditOptions audit_opts;
    int runs = 0, sets = 0;
    auto* opt_runs = audit->add_option("--runs", runs, "Number of runs (overrides the config)");
    auto* opt_sets = audit->add_option("--sets", sets, "Averaging sets per class (overrides the config)");
    audit->add_flag("--export-averages", audit_opts.export_averages, "Write run 0 average images as AVGI");
    audit->add_flag("--export-png", audit_opts.export_png, "Also write clipped 8-bit previews (lossy)");

    auto* inspect = app.add_subcommand("inspect", "Print raster statistics and strong defects");
    std::vector<std::string> inspect_paths;
    cli::InspectOptions inspect_opts;
    std::string inspect_csv;
    inspect->add_option("inputs", inspect_paths, "AVGI or PNG files")->required()->check(CLI::ExistingFile);
    inspect->add_option("--threshold", inspect_opts.threshold, "Median-residual threshold");
    inspect->add_flag("--diff", inspect_opts.diff, "List defects of the second input missing from the first");
    auto* opt_csv = inspect->add_option("--csv", inspect_csv, "Also write hits as CSV");

    auto* predict = app.add_subcommand("predict", "Adapter-protocol scorer backed by TinyNet checkpoints");
    std::string model_dir, manifest, scores;
    std::string fusion = "score_sum";
    predict->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
    predict->add_option("--manifest", manifest, "Manifest of AVGI paths")->required();
    predict->add_option("--out", scores, "Scores CSV")->required();
    predict->add_option("--fusion", fusion, "score_sum or majority");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*opt_config) global.config_path = config_path;
    if (*opt_seed) global.seed = seed;
    if (*opt_out) global.out = out;
    avgaudit::set_num_threads(global.threads);

    try {
        if (*inspect) {
            if (*opt_csv) inspect_opts.csv_out = inspect_csv;
            return cli::cmd_inspect(inspect_paths, inspect_opts, std::cout);
        }
        if (*predict) {
            const auto rule = avgaudit::learn::parse_fusion(fusion);
            if (!rule) throw avgaudit::ConfigError("unknown fusion rule '" + fusion + "'");
            return cli::cmd_predict(model_dir, manifest, scores, *rule);
        }
        const auto config = cli::resolve_config(global);
        if (*generate) return cli::cmd_generate(config, global.force, std::cout);
        if (*train) {
            if (*opt_stop) train_opts.stop_after = stop_after;
            return cli::cmd_train(config, global.force, train_opts, std::cout);
        }
        if (*audit) {
            if (*opt_runs) audit_opts.runs = runs;
            if (*opt_sets) audit_opts.sets = sets;
            return cli::cmd_audit(config, global.force, audit_opts, std::cout);
        }
    } catch (const avgaudit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const avgaudit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const avgaudit::AdapterError& e) {
        std::cerr << "adapter error: " << e.what() << "\n";
        if (!e.captured_stderr().empty()) std::cerr << "adapter stderr:\n" << e.captured_stderr();
        return 4;
    } catch (const avgaudit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
