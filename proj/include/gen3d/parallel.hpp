#pragma once

#include <functional>

namespace gen3d {

// Worker cap from GEN3D_THREADS (0 or unset = hardware concurrency).
int thread_budget();

// Runs fn(chunk) for chunk in [0, chunk_count). Chunks are pulled from a
// shared counter, so fn must produce results that do not depend on which
// thread executes which chunk. Callers that accumulate floating-point sums
// keep one buffer per chunk and reduce in chunk order afterwards; that makes
// the result bitwise independent of the thread count.
void parallel_for_chunks(int chunk_count, const std::function<void(int)>& fn);

}  // namespace gen3d
