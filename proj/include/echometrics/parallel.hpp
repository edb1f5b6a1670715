#pragma once

#include <cstddef>
#include <functional>

namespace echometrics {

// Worker count from ECHO_METRICS_THREADS (0 or unset = hardware concurrency).
std::size_t thread_count();

// Runs body(i) for i in [0, n) across thread_count() workers. Bodies must
// write only to slots owned by their index; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace echometrics
