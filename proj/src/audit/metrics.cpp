#include "avgaudit/audit/metrics.hpp"

#include "avgaudit/core/error.hpp"

#include <cmath>
#include <string>

namespace avgaudit::audit {

namespace {

void check_lists(std::span<const double> a, std::span<const double> b) {
    if (a.empty()) throw DataError("accuracy lists are empty");
    if (a.size() != b.size())
        throw DataError("accuracy lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    for (auto list : {a, b})
        for (double v : list)
            if (!(v >= 0.0 && v <= 1.0)) throw DataError("accuracy outside [0,1]: " + std::to_string(v));
}

} // namespace

double delta_binary(std::span<const double> acc_s, std::span<const double> acc_avg, int num_classes) {
    if (num_classes != 2)
        throw ConfigError("delta_binary needs exactly 2 classes (got " + std::to_string(num_classes) +
                          "); use delta_general");
    check_lists(acc_s, acc_avg);
    double sum = 0.0;
    for (std::size_t i = 0; i < acc_s.size(); ++i) sum += (acc_s[i] - 0.5) - std::abs(acc_avg[i] - 0.5);
    return sum / static_cast<double>(acc_s.size());
}

double delta_general(std::span<const double> acc_s, std::span<const double> acc_avg) {
    check_lists(acc_s, acc_avg);
    double sum = 0.0;
    for (std::size_t i = 0; i < acc_s.size(); ++i) sum += acc_s[i] - acc_avg[i];
    return sum / static_cast<double>(acc_s.size());
}

} // namespace avgaudit::audit
