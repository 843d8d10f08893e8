#include "climdown/downscale/evaluate.hpp"

#include <cmath>

#include "climdown/error.hpp"
#include "climdown/metrics/metrics.hpp"

namespace climdown::downscale {

Prediction model_prediction(const TrainedModel& m, const Dataset& d, std::span<const std::size_t> idx,
                            std::string label) {
  return {std::move(label), m.predict(d, idx)};
}

Prediction baseline_prediction(const Dataset& d, std::span<const std::size_t> idx) {
  Prediction p{"bilinear", {}};
  for (auto i : idx) p.fields.push_back(bilinear_baseline(d, i));
  return p;
}

Prediction target_prediction(const Dataset& d, std::span<const std::size_t> idx) {
  Prediction p{"target", {}};
  for (auto i : idx) p.fields.push_back(d.samples.at(i).target);
  return p;
}

namespace {

geogrid::DataCube cube_of(const Dataset& d, std::span<const std::size_t> idx,
                          const std::vector<std::vector<double>>& fields, const std::string& variable) {
  if (fields.size() != idx.size()) throw ValidationError("prediction count does not match the sample count");
  std::vector<geogrid::Date> time;
  std::vector<double> data;
  data.reserve(idx.size() * d.shape.target_size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    time.push_back(d.samples.at(idx[k]).date);
    if (fields[k].size() != d.shape.target_size()) throw ValidationError("prediction has the wrong grid size");
    data.insert(data.end(), fields[k].begin(), fields[k].end());
  }
  return geogrid::DataCube(d.fine_lat, d.fine_lon, std::move(time), d.calendar, variable, d.units,
                           std::move(data));
}

}  // namespace

geogrid::DataCube prediction_cube(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p) {
  return cube_of(d, idx, p.fields, d.variable);
}

geogrid::DataCube target_cube(const Dataset& d, std::span<const std::size_t> idx) {
  std::vector<std::vector<double>> f;
  for (auto i : idx) f.push_back(d.samples.at(i).target);
  return cube_of(d, idx, f, d.variable);
}

std::vector<metrics::ReportRow> evaluate(const Dataset& d, std::span<const std::size_t> idx,
                                         const std::vector<Prediction>& preds, const geogrid::ZoneMask& mask,
                                         const std::vector<geogrid::Zone>& zones,
                                         const std::vector<geogrid::Season>& seasons) {
  if (!(mask.lat() == d.fine_lat) || !(mask.lon() == d.fine_lon))
    throw ValidationError("evaluate: zone mask grid differs from the fine grid");
  const auto obs = target_cube(d, idx);
  std::vector<metrics::ReportRow> rows;
  for (const auto& p : preds) {
    const auto model = prediction_cube(d, idx, p);
    for (auto z : zones) {
      for (auto s : seasons) {
        metrics::ReportRow row{p.label, geogrid::zone_name(z), std::string(geogrid::season_name(s)), {}};
        try {
          row.report = metrics::full_report(model, obs, mask, z, s);
        } catch (const ValidationError&) {
          row.report = metrics::MetricReport{};  // too few matched values in this context
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

double field_rmse(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p) {
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& t = d.samples.at(idx[k]).target;
    for (std::size_t c = 0; c < t.size(); ++c) {
      ss += (p.fields[k][c] - t[c]) * (p.fields[k][c] - t[c]);
      ++n;
    }
  }
  return n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
}

double field_bias(const Dataset& d, std::span<const std::size_t> idx, const Prediction& p) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& t = d.samples.at(idx[k]).target;
    for (std::size_t c = 0; c < t.size(); ++c) {
      s += p.fields[k][c] - t[c];
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace climdown::downscale
