#pragma once

#include <span>
#include <string>
#include <vector>

#include "climdown/downscale/data.hpp"
#include "climdown/downscale/models.hpp"
#include "climdown/geogrid/grid.hpp"
#include "climdown/metrics/report_io.hpp"

namespace climdown::downscale {

/// Fine fields (physical units) for samples `idx` of a dataset, under a row label.
struct Prediction {
  std::string label;
  std::vector<std::vector<double>> fields;
};

Prediction model_prediction(const TrainedModel& m, const Dataset& d, std::span<const std::size_t> idx,
                            std::string label);
/// Bilinear interpolation of the last coarse frame; labelled "bilinear".
Prediction baseline_prediction(const Dataset& d, std::span<const std::size_t> idx);
/// The targets themselves; labelled "target".
Prediction target_prediction(const Dataset& d, std::span<const std::size_t> idx);

/// Prediction and truth as fine-grid cubes dated by the target days.
geogrid::DataCube prediction_cube(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p);
geogrid::DataCube target_cube(const Dataset& d, std::span<const std::size_t> idx);

/// One metric row per (label, zone, season), labels in the given order. Contexts with
/// fewer than two matched values get a row with n = 0 and every metric undefined.
std::vector<metrics::ReportRow> evaluate(const Dataset& d, std::span<const std::size_t> idx,
                                         const std::vector<Prediction>& preds, const geogrid::ZoneMask& mask,
                                         const std::vector<geogrid::Zone>& zones,
                                         const std::vector<geogrid::Season>& seasons);

/// Pooled over all cells and samples.
double field_rmse(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p);
double field_bias(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p);

}  // namespace climdown::downscale
