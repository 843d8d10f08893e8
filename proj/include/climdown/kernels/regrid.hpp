#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace climdown::kernels {

/// Per-target-point bracketing index and upper-neighbour weight along one axis.
/// Targets outside the source range clamp to the edge (weight 0 or 1).
struct AxisWeights {
  std::vector<std::size_t> lower;
  std::vector<double> weight;
};

AxisWeights bilinear_weights(std::span<const double> src, std::span<const double> dst);

struct RegridGeom {
  std::size_t nt = 0;
  std::size_t src_ny = 0, src_nx = 0;
  std::size_t dst_ny = 0, dst_nx = 0;
  double fill = 0.0;
};

/// Textbook per-point evaluation, one slice after another.
void regrid_reference(const RegridGeom& g, const AxisWeights& wy, const AxisWeights& wx,
                      std::span<const double> src, std::span<double> dst);

/// Same arithmetic, time slices distributed over OpenMP threads.
void regrid_parallel(const RegridGeom& g, const AxisWeights& wy, const AxisWeights& wx,
                     std::span<const double> src, std::span<double> dst);

}  // namespace climdown::kernels
