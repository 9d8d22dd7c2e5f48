#pragma once

#include "avgaudit/audit/audit.hpp"

#include <string>
#include <vector>

namespace avgaudit::audit {

// Reading of a report against soft thresholds. These are rules of thumb:
// there is no exact cut-off separating "approximately zero" from a real loss.
// Uses the binary delta when available, the general one otherwise.
// The first line always states the heuristic nature and the threshold.
std::vector<std::string> interpret_report(const AuditReport& report, double soft_threshold = 0.05);

} // namespace avgaudit::audit
