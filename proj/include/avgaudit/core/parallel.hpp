#pragma once

#include <cstddef>
#include <functional>

namespace avgaudit {

// Process-wide worker count used by parallel_for (default 1).
void set_num_threads(int n);
int num_threads() noexcept;

// Runs body(i) for i in [0, n), splitting the range into contiguous chunks
// over num_threads() workers. Callers keep results index-addressed so the
// outcome never depends on the worker count. The first exception thrown by
// any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace avgaudit
