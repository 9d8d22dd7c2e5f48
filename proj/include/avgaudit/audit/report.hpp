#pragma once

#include "avgaudit/audit/audit.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace avgaudit::audit {

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

// imager,run,acc_S,acc_avg_standard,acc_avg_color,acc_avg_range,acc_avg_filtered
std::string runs_csv(std::span<const AuditReport> reports);

// imager,delta_Y,delta_Yc,delta_Yr,delta_Yf,deltaGEN_Y,deltaGEN_Yc,deltaGEN_Yr,deltaGEN_Yf,mean_acc_S
// One row per imager plus a final "mean" row averaging the rows above.
// Delta cells stay empty for non-binary reports.
std::string summary_csv(std::span<const AuditReport> reports);

nlohmann::json report_to_json(const AuditReport& report);

// Writes runs.csv, summary.csv, report.json and findings.txt into `dir`.
void write_report_files(std::span<const AuditReport> reports, const std::filesystem::path& dir,
                        double soft_threshold = 0.05);

} // namespace avgaudit::audit
