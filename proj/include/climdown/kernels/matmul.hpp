#pragma once

#include <cstddef>
#include <span>

namespace climdown::kernels {

// Row-major dense products, accumulating into C (C += op(A) op(B)).
// Rows of C are distributed over threads; each row is summed in a fixed order.

/// C[m,n] += A[m,k] B[k,n]
void matmul_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c);
/// C[m,n] += A[k,m]^T B[k,n]
void matmul_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c);
/// C[m,n] += A[m,k] B[n,k]^T
void matmul_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
               std::span<const double> b, std::span<double> c);

/// Triple-loop reference for C += A B.
void matmul_reference(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
                      std::span<const double> b, std::span<double> c);

}  // namespace climdown::kernels
