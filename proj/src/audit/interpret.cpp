#include "avgaudit/audit/interpret.hpp"

#include "avgaudit/audit/report.hpp"

#include <algorithm>
#include <cmath>

namespace avgaudit::audit {

std::vector<std::string> interpret_report(const AuditReport& report, double thr) {
    std::vector<std::string> out;
    out.push_back("heuristic reading, soft threshold " + format_number(thr) + " (no exact threshold exists)");
    if (report.runs.empty()) {
        out.push_back("no completed runs; no finding");
        return out;
    }

    const double chance = 1.0 / static_cast<double>(report.num_classes);
    if (report.mean_acc_s - chance <= thr) {
        out.push_back("model at chance; no finding");
        return out;
    }

    const VariantValues d = report.delta ? *report.delta : report.delta_gen;
    const std::string label = report.delta ? "delta" : "deltaGEN";
    const double y = d[0], yc = d[1], yr = d[2], yf = d[3];
    auto near_zero = [&](double v) { return std::abs(v) <= thr; };
    auto show = [&](const char* name, double v) { return label + "(" + name + ")=" + format_number(v); };

    const double lo = std::min({y, yc, yr, yf}), hi = std::max({y, yc, yr, yf});
    if (hi - lo <= thr && lo > thr) {
        out.push_back("content-dependent inference: all four variants lose similar accuracy (" + show("Y", y) + ", " +
                      show("Yc", yc) + ", " + show("Yr", yr) + ", " + show("Yf", yf) + ")");
    } else if (near_zero(y) && yc > thr) {
        std::string line = "consistent with age-signal inference: " + show("Y", y) + " is approximately zero while " +
                           show("Yc", yc) + " is large";
        if (near_zero(yr)) line += "; " + show("Yr", yr) + " agrees";
        out.push_back(line);
    }
    if (near_zero(yc))
        out.push_back("content is most likely exploited: the average color alone keeps the accuracy (" + show("Yc", yc) + ")");
    if (!near_zero(yr - y) && near_zero(y))
        out.push_back("removing the global minimum changes the outcome (" + show("Yr", yr) +
                      "); the model depends on absolute intensity");
    if (near_zero(y) && yf > thr)
        out.push_back("median filtering removes what the model uses (" + show("Yf", yf) +
                      "); high-frequency traces such as isolated defects are likely relevant");
    if (y < -thr)
        out.push_back("average images are classified better than test images (" + show("Y", y) + ")");
    if (out.size() == 1) out.push_back("no pattern matched the soft thresholds");
    return out;
}

} // namespace avgaudit::audit
