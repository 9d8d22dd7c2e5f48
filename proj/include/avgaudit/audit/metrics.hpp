#pragma once

#include <span>

namespace avgaudit::audit {

// Separability difference for binary problems, averaged over runs:
//   (1/N) sum_i (acc_S_i - 0.5) - |acc_avg_i - 0.5|
// Accuracies of 0 and 1 are equally separable, hence the absolute value.
// Throws ConfigError when num_classes != 2 (use delta_general) and DataError
// for empty or unequal lists or values outside [0,1].
double delta_binary(std::span<const double> acc_s, std::span<const double> acc_avg, int num_classes = 2);

// Class-count independent form: (1/N) sum_i (acc_S_i - acc_avg_i).
double delta_general(std::span<const double> acc_s, std::span<const double> acc_avg);

} // namespace avgaudit::audit
