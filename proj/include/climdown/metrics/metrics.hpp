#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "climdown/geogrid/grid.hpp"

namespace climdown::metrics {

/// Paired model/observation values pooled over a (zone, season) context.
class PooledSample {
 public:
  /// Requires equal lengths, n >= 2, all values finite.
  PooledSample(std::vector<double> model, std::vector<double> obs);

  const std::vector<double>& model() const { return model_; }
  const std::vector<double>& obs() const { return obs_; }
  std::size_t size() const { return model_.size(); }

 private:
  std::vector<double> model_;
  std::vector<double> obs_;
};

enum class MetricId : int {
  kBias = 0,
  kRmse,
  kR,
  kR2,
  kNse,
  kKge,
  kPdfOverlap,
  kTxxErr,
  kTnnErr,
  kSdDiff,
};
inline constexpr std::size_t kMetricCount = 10;
inline constexpr std::array<MetricId, kMetricCount> kAllMetrics{
    MetricId::kBias,       MetricId::kRmse,   MetricId::kR,      MetricId::kR2,
    MetricId::kNse,        MetricId::kKge,    MetricId::kPdfOverlap, MetricId::kTxxErr,
    MetricId::kTnnErr,     MetricId::kSdDiff};

std::string_view metric_name(MetricId id);
MetricId parse_metric(std::string_view name);

inline constexpr int kDefaultPdfBins = 100;

double bias(const PooledSample& s);
double rmse(const PooledSample& s);
/// Empty when either series has zero variance.
std::optional<double> pearson_r(const PooledSample& s);
/// Empty when the observations are constant.
std::optional<double> nse(const PooledSample& s);
/// Empty when a mean is zero or a series is constant. Population standard deviations.
std::optional<double> kge(const PooledSample& s);
/// Shared equal-width histogram over [min, max] of both series; 1 when all values coincide.
double pdf_overlap(const PooledSample& s, int bins = kDefaultPdfBins);

struct ExtremeErrors {
  double txx_err = 0.0;  // |max(M) - max(O)|
  double tnn_err = 0.0;  // |min(M) - min(O)|
};
ExtremeErrors extreme_errors(const PooledSample& s);

/// |sd(M) - sd(O)|, population convention.
double sd_diff(const PooledSample& s);

struct MetricReport {
  std::array<double, kMetricCount> values{};
  std::array<bool, kMetricCount> valid{};
  std::size_t n = 0;

  std::optional<double> get(MetricId id) const {
    const auto k = static_cast<std::size_t>(id);
    return valid[k] ? std::optional<double>(values[k]) : std::nullopt;
  }
  bool is_valid(MetricId id) const { return valid[static_cast<std::size_t>(id)]; }
  /// Raw stored value; meaningless when invalid.
  double raw(MetricId id) const { return values[static_cast<std::size_t>(id)]; }
};

/// Every metric on one sample.
MetricReport compute_report(const PooledSample& s, int bins = kDefaultPdfBins);

/// Pairs (date, cell) values present and non-fill in both cubes, restricted to `zone`
/// and `season`. Dates are matched by value so mixed calendars pool their common days.
/// Throws ValidationError when nothing is left.
PooledSample pool(const geogrid::DataCube& model, const geogrid::DataCube& obs,
                  const geogrid::ZoneMask& mask, geogrid::Zone zone, geogrid::Season season);

MetricReport full_report(const geogrid::DataCube& model, const geogrid::DataCube& obs,
                         const geogrid::ZoneMask& mask, geogrid::Zone zone,
                         geogrid::Season season, int bins = kDefaultPdfBins);

}  // namespace climdown::metrics
