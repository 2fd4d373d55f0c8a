#pragma once

#include <cstddef>
#include <functional>

namespace c2fpl {

// Worker cap: C2FPL_THREADS if set and positive, else hardware concurrency.
std::size_t thread_cap();

// Calls body(i) for i in [0, n) across up to thread_cap() threads. Results
// must be written to slot i by the caller, which keeps output order fixed.
// The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace c2fpl
