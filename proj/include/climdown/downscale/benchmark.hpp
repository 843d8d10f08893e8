#pragma once

#include <cstdint>

#include "climdown/downscale/data.hpp"
#include "climdown/geogrid/grid.hpp"

namespace climdown::downscale {

/// The bundled synthetic benchmark: windows over one synthetic coarse/fine pair.
struct BenchmarkSpec {
  std::uint64_t seed = 2024;
  std::size_t samples = 200;
  std::size_t t = 4;
  std::size_t coarse = 16;  // coarse grid is coarse x coarse
  std::size_t factor = 4;
  std::size_t stride = 2;   // days between consecutive window ends
  double bias = 0.0;
  double noise_sd = 0.1;
};

struct Benchmark {
  Dataset data;
  geogrid::ZoneMask mask;  // on the fine grid
};

Benchmark make_benchmark(const BenchmarkSpec& spec = {});

/// Eight samples spread over a year, for capacity (overfitting) checks.
BenchmarkSpec overfit_spec();

}  // namespace climdown::downscale
