#pragma once

#include <cstdint>
#include <utility>

#include "climdown/geogrid/grid.hpp"

namespace climdown::geogrid {

struct SynthSpec {
  std::uint64_t seed = 0;
  int coarse_factor = 4;
  std::size_t nt = 8;
  std::size_t nlat = 16;  // fine grid
  std::size_t nlon = 16;
  double bias = 0.0;      // added to the coarse field
  double noise_sd = 0.0;  // iid Gaussian noise on the coarse field
  // Fine-grid placement (cell centres start half a step in).
  double lat0 = 45.0;
  double lon0 = 5.0;
  double step = 0.1;
  Date start{1985, 1, 1};
  std::string variable = "tasmax";
};

struct SynthPair {
  DataCube coarse;
  DataCube fine;
};

/// Desk-scale ground truth. The fine field is a fixed-count sum of random sinusoids:
/// a static sub-grid pattern, large-scale waves whose amplitudes oscillate in time, and a
/// seasonal cycle. The coarse field is the block mean of the fine field plus bias and noise.
/// Deterministic in `seed`; both cubes share the time axis.
SynthPair synth_pair(const SynthSpec& spec);

/// Block-mean pooling of a fine cube by `factor` (fill-free input).
DataCube block_mean(const DataCube& fine, int factor);

/// Latitude bands of the five classes with a random ocean fraction (deterministic in seed).
ZoneMask synth_zone_mask(const GridAxis& lat, const GridAxis& lon, std::uint64_t seed,
                         double ocean_fraction = 0.15);

}  // namespace climdown::geogrid
