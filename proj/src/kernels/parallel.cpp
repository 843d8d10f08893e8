#include "climdown/kernels/parallel.hpp"

#include <omp.h>

namespace climdown::kernels {

namespace {
int g_default_threads = -1;
}

void set_num_threads(int n) {
  if (g_default_threads < 0) g_default_threads = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_threads);
}

int num_threads() { return omp_get_max_threads(); }

}  // namespace climdown::kernels
