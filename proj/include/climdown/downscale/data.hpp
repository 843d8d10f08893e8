#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "climdown/geogrid/grid.hpp"
#include "climdown/tensor/tensor.hpp"

namespace climdown::downscale {

/// Sizes of one model input/output pair.
struct InputShape {
  std::size_t t = 1;  // frames
  std::size_t c = 1;  // variables
  std::size_t hc = 1, wc = 1;
  std::size_t factor = 2;

  std::size_t hf() const { return factor * hc; }
  std::size_t wf() const { return factor * wc; }
  std::size_t input_size() const { return t * c * hc * wc; }
  std::size_t target_size() const { return hf() * wf(); }
  bool operator==(const InputShape&) const = default;
};

void to_json(nlohmann::json& j, const InputShape& s);
void from_json(const nlohmann::json& j, InputShape& s);

/// One window of coarse frames and the fine field on its last day (degrees C).
struct DownscaleSample {
  std::vector<double> input;   // [t, c, hc, wc]
  std::vector<double> target;  // [hf, wf]
  geogrid::Date date;          // date of the target field
};

/// Domain extent used to scale coordinates to [-1, 1].
struct DomainBounds {
  double lat_min = -1, lat_max = 1, lon_min = -1, lon_max = 1;
};

void to_json(nlohmann::json& j, const DomainBounds& b);
void from_json(const nlohmann::json& j, DomainBounds& b);

/// Samples sharing one coarse and one fine grid.
struct Dataset {
  InputShape shape;
  geogrid::GridAxis coarse_lat, coarse_lon, fine_lat, fine_lon;
  geogrid::Calendar calendar = geogrid::Calendar::kStandard;
  std::string variable;
  std::string units = "degC";
  std::vector<DownscaleSample> samples;

  std::size_t size() const { return samples.size(); }
  /// Cell-centre extent of the coarse grid.
  DomainBounds bounds() const;
  Dataset subset(std::span<const std::size_t> idx) const;
};

/// Windows of `t` consecutive coarse days ending every `stride` days, paired with the fine
/// field on the window's last day. `coarse` holds one cube per input variable; all cubes
/// share the time axis and the fine grid is an integer refinement of the coarse one.
/// `max_samples` of 0 means as many as fit.
Dataset build_dataset(const std::vector<geogrid::DataCube>& coarse, const geogrid::DataCube& fine,
                      std::size_t t, std::size_t stride = 1, std::size_t max_samples = 0);

/// Benchmark split by sample index: i % 5 == 4 test, i % 5 == 2 validation, else training.
struct Split {
  std::vector<std::size_t> train, val, test;
};
Split benchmark_split(std::size_t n);

/// One scalar shift and scale applied to inputs and targets alike, so the networks see
/// the physical relation between coarse and fine values unchanged.
struct Normalizer {
  double mean = 0.0;
  double sd = 1.0;

  static Normalizer fit(const Dataset& d);  // from the targets
  double apply(double v) const { return (v - mean) / sd; }
  double invert(double z) const { return z * sd + mean; }
};

void to_json(nlohmann::json& j, const Normalizer& n);
void from_json(const nlohmann::json& j, Normalizer& n);

/// Normalised inputs [n, t, c, hc, wc] and targets [n, hf, wf] for the given samples.
tensor::Tensor batch_inputs(const Dataset& d, std::span<const std::size_t> idx, const Normalizer& nz);
tensor::Tensor batch_targets(const Dataset& d, std::span<const std::size_t> idx, const Normalizer& nz);

/// Patch-centre (lat, lon) of a `patch` x `patch` tiling of the coarse grid, row-major,
/// min-max scaled to [-1, 1] over `bounds`. Shape [N, 2].
tensor::Tensor patch_coords(const Dataset& d, std::size_t patch, const DomainBounds& bounds);

/// Bilinear interpolation of the last input frame (first variable) to the fine grid.
std::vector<double> bilinear_baseline(const Dataset& d, std::size_t i);

}  // namespace climdown::downscale
