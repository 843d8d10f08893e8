#pragma once

#include <cstddef>
#include <span>

namespace climdown::kernels {

/// NCHW cross-correlation geometry. Kernel layout [c_out, c_in, k, k].
struct ConvGeom {
  std::size_t n = 1, c_in = 1, h = 1, w = 1;
  std::size_t c_out = 1, k = 1, stride = 1, pad = 0;

  std::size_t h_out() const { return (h + 2 * pad - k) / stride + 1; }
  std::size_t w_out() const { return (w + 2 * pad - k) / stride + 1; }
  std::size_t in_size() const { return n * c_in * h * w; }
  std::size_t out_size() const { return n * c_out * h_out() * w_out(); }
  std::size_t kernel_size() const { return c_out * c_in * k * k; }
};

// Optimized kernels. Output planes are owned by exactly one thread and every
// element is accumulated in a fixed order, so results do not depend on the
// thread count.

/// y = conv(x, K) + b. `bias` may be empty. Overwrites y.
void conv2d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> y);
/// dx += conv^T(dy, K).
void conv2d_backward_input(const ConvGeom& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx);
/// dK += x (*) dy, db += sum(dy). `dbias` may be empty.
void conv2d_backward_weight(const ConvGeom& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel,
                            std::span<double> dbias);

// Naive single-threaded references (one output element at a time).
void conv2d_forward_reference(const ConvGeom& g, std::span<const double> x,
                              std::span<const double> kernel, std::span<const double> bias,
                              std::span<double> y);
void conv2d_backward_input_reference(const ConvGeom& g, std::span<const double> dy,
                                     std::span<const double> kernel, std::span<double> dx);
void conv2d_backward_weight_reference(const ConvGeom& g, std::span<const double> x,
                                      std::span<const double> dy, std::span<double> dkernel,
                                      std::span<double> dbias);

}  // namespace climdown::kernels
