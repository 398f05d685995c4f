#pragma once

#include <cstddef>
#include <functional>

namespace hyqal {

// Global worker cap for parallel_for. 1 is the reference schedule; every
// parallel schedule must produce bit-identical results to it, so parallel_for
// is only used for loops whose iterations write disjoint outputs.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Iterations must be independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace hyqal
