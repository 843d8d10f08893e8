#include "climdown/kernels/conv.hpp"

#include <algorithm>
#include <cstddef>

namespace climdown::kernels {

namespace {

// Output columns ox whose input column ox*stride + kx - pad lies in [0, w).
inline void valid_range(std::size_t w, std::size_t w_out, std::size_t stride, std::size_t pad,
                        std::size_t kx, std::size_t& lo, std::size_t& hi) {
  // ox*stride + kx >= pad
  lo = kx >= pad ? 0 : (pad - kx + stride - 1) / stride;
  // ox*stride + kx - pad <= w - 1
  const std::size_t lim = w - 1 + pad;
  hi = kx > lim ? 0 : std::min(w_out, (lim - kx) / stride + 1);
  if (lo > hi) lo = hi;
}

void forward_plane(const ConvGeom& g, const double* x, const double* kernel, double bias,
                   std::size_t co, double* y) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  const std::size_t k = g.k, s = g.stride;
  std::fill(y, y + ho * wo, bias);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    const double* xp = x + ci * g.h * g.w;
    const double* kp = kernel + (co * g.c_in + ci) * k * k;
    for (std::size_t ky = 0; ky < k; ++ky) {
      std::size_t oy_lo, oy_hi;
      valid_range(g.h, ho, s, g.pad, ky, oy_lo, oy_hi);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double wgt = kp[ky * k + kx];
        std::size_t ox_lo, ox_hi;
        valid_range(g.w, wo, s, g.pad, kx, ox_lo, ox_hi);
        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
          const double* xr = xp + (oy * s + ky - g.pad) * g.w;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
          double* yr = y + oy * wo;
          if (s == 1) {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yr[ox] += wgt * xr[static_cast<std::ptrdiff_t>(ox) + shift];
          } else {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yr[ox] += wgt * xr[static_cast<std::ptrdiff_t>(ox * s) + shift];
          }
        }
      }
    }
  }
}

void backward_input_plane(const ConvGeom& g, const double* dy, const double* kernel,
                          std::size_t ci, double* dx) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  const std::size_t k = g.k, s = g.stride;
  for (std::size_t co = 0; co < g.c_out; ++co) {
    const double* dyp = dy + co * ho * wo;
    const double* kp = kernel + (co * g.c_in + ci) * k * k;
    for (std::size_t ky = 0; ky < k; ++ky) {
      std::size_t oy_lo, oy_hi;
      valid_range(g.h, ho, s, g.pad, ky, oy_lo, oy_hi);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double wgt = kp[ky * k + kx];
        std::size_t ox_lo, ox_hi;
        valid_range(g.w, wo, s, g.pad, kx, ox_lo, ox_hi);
        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
          double* xr = dx + (oy * s + ky - g.pad) * g.w;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
          const double* dyr = dyp + oy * wo;
          if (s == 1) {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) xr[static_cast<std::ptrdiff_t>(ox) + shift] += wgt * dyr[ox];
          } else {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) xr[static_cast<std::ptrdiff_t>(ox * s) + shift] += wgt * dyr[ox];
          }
        }
      }
    }
  }
}

void backward_weight_pair(const ConvGeom& g, const double* x, const double* dy, std::size_t co,
                          std::size_t ci, double* dk) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  const std::size_t k = g.k, s = g.stride;
  const std::size_t in_stride = g.c_in * g.h * g.w;
  const std::size_t out_stride = g.c_out * ho * wo;
  for (std::size_t ky = 0; ky < k; ++ky) {
    std::size_t oy_lo, oy_hi;
    valid_range(g.h, ho, s, g.pad, ky, oy_lo, oy_hi);
    for (std::size_t kx = 0; kx < k; ++kx) {
      std::size_t ox_lo, ox_hi;
      valid_range(g.w, wo, s, g.pad, kx, ox_lo, ox_hi);
      double acc = 0.0;
      for (std::size_t b = 0; b < g.n; ++b) {
        const double* xp = x + b * in_stride + ci * g.h * g.w;
        const double* dyp = dy + b * out_stride + co * ho * wo;
        for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
          const double* xr = xp + (oy * s + ky - g.pad) * g.w;
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
          const double* dyr = dyp + oy * wo;
          if (s == 1) {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) acc += dyr[ox] * xr[static_cast<std::ptrdiff_t>(ox) + shift];
          } else {
            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) acc += dyr[ox] * xr[static_cast<std::ptrdiff_t>(ox * s) + shift];
          }
        }
      }
      dk[ky * k + kx] += acc;
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeom& g, std::span<const double> x, std::span<const double> kernel,
                    std::span<const double> bias, std::span<double> y) {
  const std::size_t in_plane = g.c_in * g.h * g.w;
  const std::size_t out_plane = g.h_out() * g.w_out();
  const long jobs = static_cast<long>(g.n * g.c_out);
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / g.c_out;
    const std::size_t co = static_cast<std::size_t>(job) % g.c_out;
    forward_plane(g, x.data() + b * in_plane, kernel.data(), bias.empty() ? 0.0 : bias[co], co,
                  y.data() + (b * g.c_out + co) * out_plane);
  }
}

void conv2d_backward_input(const ConvGeom& g, std::span<const double> dy,
                           std::span<const double> kernel, std::span<double> dx) {
  const std::size_t out_plane = g.c_out * g.h_out() * g.w_out();
  const std::size_t in_plane = g.h * g.w;
  const long jobs = static_cast<long>(g.n * g.c_in);
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / g.c_in;
    const std::size_t ci = static_cast<std::size_t>(job) % g.c_in;
    backward_input_plane(g, dy.data() + b * out_plane, kernel.data(), ci,
                         dx.data() + (b * g.c_in + ci) * in_plane);
  }
}

void conv2d_backward_weight(const ConvGeom& g, std::span<const double> x,
                            std::span<const double> dy, std::span<double> dkernel,
                            std::span<double> dbias) {
  const long jobs = static_cast<long>(g.c_out * g.c_in);
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const std::size_t co = static_cast<std::size_t>(job) / g.c_in;
    const std::size_t ci = static_cast<std::size_t>(job) % g.c_in;
    backward_weight_pair(g, x.data(), dy.data(), co, ci,
                         dkernel.data() + (co * g.c_in + ci) * g.k * g.k);
  }
  if (!dbias.empty()) {
    const std::size_t plane = g.h_out() * g.w_out();
    for (std::size_t co = 0; co < g.c_out; ++co) {
      double acc = 0.0;
      for (std::size_t b = 0; b < g.n; ++b) {
        const double* p = dy.data() + (b * g.c_out + co) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      dbias[co] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// References

namespace {

inline bool in_bounds(long v, std::size_t n) { return v >= 0 && v < static_cast<long>(n); }

}  // namespace

void conv2d_forward_reference(const ConvGeom& g, std::span<const double> x,
                              std::span<const double> kernel, std::span<const double> bias,
                              std::span<double> y) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t b = 0; b < g.n; ++b)
    for (std::size_t co = 0; co < g.c_out; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (std::size_t ci = 0; ci < g.c_in; ++ci)
            for (std::size_t ky = 0; ky < g.k; ++ky)
              for (std::size_t kx = 0; kx < g.k; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (!in_bounds(iy, g.h) || !in_bounds(ix, g.w)) continue;
                acc += kernel[((co * g.c_in + ci) * g.k + ky) * g.k + kx] *
                       x[((b * g.c_in + ci) * g.h + iy) * g.w + ix];
              }
          y[((b * g.c_out + co) * ho + oy) * wo + ox] = acc;
        }
}

void conv2d_backward_input_reference(const ConvGeom& g, std::span<const double> dy,
                                     std::span<const double> kernel, std::span<double> dx) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t b = 0; b < g.n; ++b)
    for (std::size_t co = 0; co < g.c_out; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double d = dy[((b * g.c_out + co) * ho + oy) * wo + ox];
          for (std::size_t ci = 0; ci < g.c_in; ++ci)
            for (std::size_t ky = 0; ky < g.k; ++ky)
              for (std::size_t kx = 0; kx < g.k; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (!in_bounds(iy, g.h) || !in_bounds(ix, g.w)) continue;
                dx[((b * g.c_in + ci) * g.h + iy) * g.w + ix] +=
                    kernel[((co * g.c_in + ci) * g.k + ky) * g.k + kx] * d;
              }
        }
}

void conv2d_backward_weight_reference(const ConvGeom& g, std::span<const double> x,
                                      std::span<const double> dy, std::span<double> dkernel,
                                      std::span<double> dbias) {
  const std::size_t ho = g.h_out(), wo = g.w_out();
  for (std::size_t b = 0; b < g.n; ++b)
    for (std::size_t co = 0; co < g.c_out; ++co)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double d = dy[((b * g.c_out + co) * ho + oy) * wo + ox];
          if (!dbias.empty()) dbias[co] += d;
          for (std::size_t ci = 0; ci < g.c_in; ++ci)
            for (std::size_t ky = 0; ky < g.k; ++ky)
              for (std::size_t kx = 0; kx < g.k; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (!in_bounds(iy, g.h) || !in_bounds(ix, g.w)) continue;
                dkernel[((co * g.c_in + ci) * g.k + ky) * g.k + kx] +=
                    d * x[((b * g.c_in + ci) * g.h + iy) * g.w + ix];
              }
        }
}

}  // namespace climdown::kernels
