#pragma once

#include <cstddef>

namespace honestcalib {

// Internal parallelism cap (default 1: fully serial). The CLI seeds this
// from HONESTCALIB_THREADS. Parallel paths only ever compute
// order-independent per-record values, so outputs do not depend on it.
std::size_t max_threads();
void set_max_threads(std::size_t n);

}  // namespace honestcalib
