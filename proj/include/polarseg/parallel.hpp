#pragma once

#include <cstdint>
#include <functional>

namespace polarseg {

// Number of worker threads used by parallel_for. Defaults to the hardware
// concurrency, clamped to 16; overridable via POLARSEG_THREADS or set_num_threads.
int num_threads();
void set_num_threads(int n);

// Upper bound on the number of blocks parallel_for will split work into.
int parallel_block_count();

// Runs fn(block, begin, end) over contiguous index blocks of [0, n), with
// block in [0, parallel_block_count()). The partition depends only on
// (n, block count), so writes to disjoint output slices are reproducible
// run to run. Nested calls degrade to a single serial block.
void parallel_for_blocks(std::int64_t n,
                         const std::function<void(int, std::int64_t, std::int64_t)>& fn);

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace polarseg
