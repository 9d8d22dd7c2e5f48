#include "avgaudit/audit/report.hpp"

#include "avgaudit/audit/interpret.hpp"
#include "avgaudit/core/error.hpp"

#include <charconv>
#include <fstream>

namespace avgaudit::audit {

using nlohmann::json;

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

const char* kVariantKeys[4] = {"standard", "color", "range", "filtered"};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write '" + path.string() + "'");
    os << text;
    if (!os) throw DataError("failed writing '" + path.string() + "'");
}

struct SummaryRow {
    std::optional<VariantValues> delta;
    VariantValues delta_gen{};
    double mean_acc_s = 0.0;
};

std::string summary_line(const std::string& name, const SummaryRow& row) {
    std::string line = name;
    for (std::size_t v = 0; v < 4; ++v) line += "," + (row.delta ? format_number((*row.delta)[v]) : std::string());
    for (std::size_t v = 0; v < 4; ++v) line += "," + format_number(row.delta_gen[v]);
    line += "," + format_number(row.mean_acc_s) + "\n";
    return line;
}

} // namespace

std::string runs_csv(std::span<const AuditReport> reports) {
    std::string out = "imager,run,acc_S,acc_avg_standard,acc_avg_color,acc_avg_range,acc_avg_filtered\n";
    for (const auto& rep : reports)
        for (const auto& r : rep.runs) {
            out += rep.imager_id + "," + std::to_string(r.run_index) + "," + format_number(r.acc_s);
            for (double a : r.acc_variant) out += "," + format_number(a);
            out += "\n";
        }
    return out;
}

std::string summary_csv(std::span<const AuditReport> reports) {
    std::string out = "imager,delta_Y,delta_Yc,delta_Yr,delta_Yf,deltaGEN_Y,deltaGEN_Yc,deltaGEN_Yr,deltaGEN_Yf,mean_acc_S\n";
    SummaryRow mean;
    bool all_binary = !reports.empty();
    VariantValues delta_sum{};
    for (const auto& rep : reports) {
        out += summary_line(rep.imager_id, SummaryRow{rep.delta, rep.delta_gen, rep.mean_acc_s});
        all_binary = all_binary && rep.delta.has_value();
        for (std::size_t v = 0; v < 4; ++v) {
            if (rep.delta) delta_sum[v] += (*rep.delta)[v];
            mean.delta_gen[v] += rep.delta_gen[v];
        }
        mean.mean_acc_s += rep.mean_acc_s;
    }
    if (!reports.empty()) {
        const double n = static_cast<double>(reports.size());
        for (std::size_t v = 0; v < 4; ++v) {
            mean.delta_gen[v] /= n;
            delta_sum[v] /= n;
        }
        mean.mean_acc_s /= n;
        if (all_binary) mean.delta = delta_sum;
        out += summary_line("mean", mean);
    }
    return out;
}

json report_to_json(const AuditReport& rep) {
    json j;
    j["imager"] = rep.imager_id;
    j["num_classes"] = rep.num_classes;
    j["num_runs"] = rep.runs.size();
    json runs = json::array();
    for (const auto& r : rep.runs) {
        json jr;
        jr["run"] = r.run_index;
        jr["acc_S"] = r.acc_s;
        for (std::size_t v = 0; v < 4; ++v) jr[std::string("acc_avg_") + kVariantKeys[v]] = r.acc_variant[v];
        jr["test_count"] = r.test_count;
        jr["averages_per_variant"] = r.averages_per_variant;
        runs.push_back(jr);
    }
    j["runs"] = runs;
    json summary;
    for (std::size_t v = 0; v < 4; ++v) {
        if (rep.delta) summary["delta"][kVariantKeys[v]] = (*rep.delta)[v];
        summary["deltaGEN"][kVariantKeys[v]] = rep.delta_gen[v];
    }
    summary["mean_acc_S"] = rep.mean_acc_s;
    j["summary"] = summary;
    j["config"] = rep.config_snapshot;
    if (rep.failure) j["failure"] = *rep.failure;
    j["complete"] = !rep.failure.has_value();
    return j;
}

void write_report_files(std::span<const AuditReport> reports, const std::filesystem::path& dir, double thr) {
    std::filesystem::create_directories(dir);
    write_text(dir / "runs.csv", runs_csv(reports));
    write_text(dir / "summary.csv", summary_csv(reports));
    json all = json::array();
    for (const auto& r : reports) all.push_back(report_to_json(r));
    json top;
    top["reports"] = all;
    write_text(dir / "report.json", top.dump(2) + "\n");

    std::string findings;
    for (const auto& r : reports) {
        findings += "[" + r.imager_id + "]\n";
        if (r.failure) findings += "INCOMPLETE: " + *r.failure + "\n";
        for (const auto& line : interpret_report(r, thr)) findings += "- " + line + "\n";
    }
    write_text(dir / "findings.txt", findings);
}

} // namespace avgaudit::audit
