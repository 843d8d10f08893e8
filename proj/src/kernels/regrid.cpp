#include "climdown/kernels/regrid.hpp"

#include <algorithm>

namespace climdown::kernels {

AxisWeights bilinear_weights(std::span<const double> src, std::span<const double> dst) {
  AxisWeights out;
  out.lower.resize(dst.size());
  out.weight.resize(dst.size());
  const std::size_t n = src.size();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    const double y = dst[p];
    if (y <= src.front()) {
      out.lower[p] = 0;
      out.weight[p] = 0.0;
    } else if (y >= src.back()) {
      out.lower[p] = n - 2;
      out.weight[p] = 1.0;
    } else {
      const auto it = std::upper_bound(src.begin(), src.end(), y);
      const std::size_t lo = static_cast<std::size_t>(it - src.begin()) - 1;
      out.lower[p] = lo;
      out.weight[p] = (y - src[lo]) / (src[lo + 1] - src[lo]);
    }
  }
  return out;
}

namespace {

// Blend along one axis. Zero-weight neighbours are skipped entirely so that
// exact node hits are bit-exact copies and cannot pick up a neighbouring fill.
inline bool blend(double a, double b, double w, double fill, double& out) {
  if (w == 0.0) {
    out = a;
    return a != fill;
  }
  if (w == 1.0) {
    out = b;
    return b != fill;
  }
  if (a == fill || b == fill) return false;
  out = (1.0 - w) * a + w * b;
  return true;
}

inline double point(const RegridGeom& g, const double* slice, std::size_t iy, double wy,
                    std::size_t ix, double wx) {
  const double* r0 = slice + iy * g.src_nx;
  const double* r1 = r0 + g.src_nx;
  double v0 = 0.0;
  double v1 = 0.0;
  // Rows whose weight is zero are not read.
  if (wy != 1.0 && !blend(r0[ix], r0[ix + 1], wx, g.fill, v0)) return g.fill;
  if (wy != 0.0 && !blend(r1[ix], r1[ix + 1], wx, g.fill, v1)) return g.fill;
  double v = 0.0;
  blend(v0, v1, wy, g.fill, v);
  return v;
}

void regrid_slice(const RegridGeom& g, const AxisWeights& wy, const AxisWeights& wx,
                  const double* src, double* dst) {
  for (std::size_t i = 0; i < g.dst_ny; ++i) {
    const std::size_t iy = wy.lower[i];
    const double fy = wy.weight[i];
    double* row = dst + i * g.dst_nx;
    for (std::size_t j = 0; j < g.dst_nx; ++j) {
      row[j] = point(g, src, iy, fy, wx.lower[j], wx.weight[j]);
    }
  }
}

}  // namespace

void regrid_reference(const RegridGeom& g, const AxisWeights& wy, const AxisWeights& wx,
                      std::span<const double> src, std::span<double> dst) {
  const std::size_t src_plane = g.src_ny * g.src_nx;
  const std::size_t dst_plane = g.dst_ny * g.dst_nx;
  for (std::size_t t = 0; t < g.nt; ++t) {
    for (std::size_t i = 0; i < g.dst_ny; ++i) {
      for (std::size_t j = 0; j < g.dst_nx; ++j) {
        dst[t * dst_plane + i * g.dst_nx + j] = point(g, src.data() + t * src_plane, wy.lower[i],
                                                      wy.weight[i], wx.lower[j], wx.weight[j]);
      }
    }
  }
}

void regrid_parallel(const RegridGeom& g, const AxisWeights& wy, const AxisWeights& wx,
                     std::span<const double> src, std::span<double> dst) {
  const std::size_t src_plane = g.src_ny * g.src_nx;
  const std::size_t dst_plane = g.dst_ny * g.dst_nx;
  const auto nt = static_cast<long>(g.nt);
#pragma omp parallel for schedule(static)
  for (long t = 0; t < nt; ++t) {
    regrid_slice(g, wy, wx, src.data() + t * src_plane, dst.data() + t * dst_plane);
  }
}

}  // namespace climdown::kernels
