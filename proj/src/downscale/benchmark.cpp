#include "climdown/downscale/benchmark.hpp"

#include "climdown/error.hpp"
#include "climdown/geogrid/synth.hpp"

namespace climdown::downscale {

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  if (spec.samples == 0 || spec.t == 0 || spec.stride == 0)
    throw ValidationError("benchmark: samples, t and stride must be positive");
  geogrid::SynthSpec s;
  s.seed = spec.seed;
  s.coarse_factor = static_cast<int>(spec.factor);
  s.nlat = s.nlon = spec.coarse * spec.factor;
  s.nt = spec.t + spec.stride * (spec.samples - 1);
  s.bias = spec.bias;
  s.noise_sd = spec.noise_sd;
  const auto pair = geogrid::synth_pair(s);
  auto data = build_dataset({pair.coarse}, pair.fine, spec.t, spec.stride, spec.samples);
  auto mask = geogrid::synth_zone_mask(pair.fine.lat(), pair.fine.lon(), spec.seed);
  return {std::move(data), std::move(mask)};
}

BenchmarkSpec overfit_spec() {
  BenchmarkSpec s;
  s.seed = 808;
  s.samples = 8;
  s.stride = 45;
  return s;
}

}  // namespace climdown::downscale
