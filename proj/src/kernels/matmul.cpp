#include "climdown/kernels/matmul.hpp"

namespace climdown::kernels {

void matmul_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * k;
    double* ci = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

void matmul_reference(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
                      std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
}

}  // namespace climdown::kernels
