#pragma once

namespace mvgen {

// Number of worker threads used by the parallel kernels. Resolved once from
// MVGEN_THREADS (unset or 0 -> all hardware threads). All kernels produce
// bit-identical results for any thread count; MVGEN_THREADS=1 forces the
// fully serial path.
int thread_count();

// Override for tests. Pass 0 to re-read the environment.
void set_thread_count(int n);

}  // namespace mvgen
