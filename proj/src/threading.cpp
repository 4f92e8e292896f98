#include "mvgen/threading.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mvgen {

namespace {

int resolve_from_env() {
  if (const char* env = std::getenv("MVGEN_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int g_threads = -1;

}  // namespace

int thread_count() {
  if (g_threads <= 0) g_threads = resolve_from_env();
  return g_threads;
}

void set_thread_count(int n) { g_threads = n > 0 ? n : resolve_from_env(); }

}  // namespace mvgen
