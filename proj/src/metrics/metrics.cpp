#include "climdown/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "climdown/error.hpp"

namespace climdown::metrics {
namespace {

// Neumaier compensated sum.
class Sum {
 public:
  void add(double x) {
    const double t = s_ + x;
    if (std::fabs(s_) >= std::fabs(x)) {
      c_ += (s_ - t) + x;
    } else {
      c_ += (x - t) + s_;
    }
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

double mean(const std::vector<double>& v) {
  Sum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

struct Moments {
  double mean_m, mean_o;
  double ss_m, ss_o, sp;  // centred sums of squares and cross products
};

Moments moments(const PooledSample& s) {
  Moments m{};
  m.mean_m = mean(s.model());
  m.mean_o = mean(s.obs());
  Sum a, b, c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double dm = s.model()[i] - m.mean_m;
    const double dob = s.obs()[i] - m.mean_o;
    a.add(dm * dm);
    b.add(dob * dob);
    c.add(dm * dob);
  }
  m.ss_m = a.value();
  m.ss_o = b.value();
  m.sp = c.value();
  return m;
}

std::optional<double> r_from(const Moments& m) {
  if (!(m.ss_m > 0.0) || !(m.ss_o > 0.0)) return std::nullopt;
  const double r = m.sp / std::sqrt(m.ss_m * m.ss_o);
  return std::clamp(r, -1.0, 1.0);
}

double sq_error_sum(const PooledSample& s) {
  Sum e;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s.model()[i] - s.obs()[i];
    e.add(d * d);
  }
  return e.value();
}

constexpr std::array<std::string_view, kMetricCount> kNames{
    "bias", "rmse", "r", "r2", "nse", "kge", "pdf_overlap", "txx_err", "tnn_err", "sd_diff"};

}  // namespace

PooledSample::PooledSample(std::vector<double> model, std::vector<double> obs)
    : model_(std::move(model)), obs_(std::move(obs)) {
  if (model_.size() != obs_.size()) {
    throw ValidationError("pooled sample: model and obs lengths differ (" +
                          std::to_string(model_.size()) + " vs " + std::to_string(obs_.size()) +
                          ")");
  }
  if (model_.size() < 2) throw ValidationError("pooled sample: need at least 2 pairs");
  for (std::size_t i = 0; i < model_.size(); ++i) {
    if (!std::isfinite(model_[i]) || !std::isfinite(obs_[i])) {
      throw ValidationError("pooled sample: non-finite value at index " + std::to_string(i));
    }
  }
}

std::string_view metric_name(MetricId id) { return kNames[static_cast<std::size_t>(id)]; }

MetricId parse_metric(std::string_view name) {
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    if (kNames[k] == name) return static_cast<MetricId>(k);
  }
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

double bias(const PooledSample& s) {
  Sum d;
  for (std::size_t i = 0; i < s.size(); ++i) d.add(s.model()[i] - s.obs()[i]);
  return d.value() / static_cast<double>(s.size());
}

double rmse(const PooledSample& s) {
  return std::sqrt(sq_error_sum(s) / static_cast<double>(s.size()));
}

std::optional<double> pearson_r(const PooledSample& s) { return r_from(moments(s)); }

std::optional<double> nse(const PooledSample& s) {
  const Moments m = moments(s);
  if (!(m.ss_o > 0.0)) return std::nullopt;
  return 1.0 - sq_error_sum(s) / m.ss_o;
}

std::optional<double> kge(const PooledSample& s) {
  const Moments m = moments(s);
  const auto r = r_from(m);
  if (!r || m.mean_m == 0.0 || m.mean_o == 0.0) return std::nullopt;
  const double n = static_cast<double>(s.size());
  const double sd_m = std::sqrt(m.ss_m / n);
  const double sd_o = std::sqrt(m.ss_o / n);
  const double beta = m.mean_m / m.mean_o;
  const double gamma = (sd_m / m.mean_m) / (sd_o / m.mean_o);
  const double a = *r - 1.0, b = beta - 1.0, c = gamma - 1.0;
  return 1.0 - std::sqrt(a * a + b * b + c * c);
}

double pdf_overlap(const PooledSample& s, int bins) {
  if (bins < 2) throw ValidationError("pdf_overlap: need at least 2 bins");
  const auto [mlo, mhi] = std::minmax_element(s.model().begin(), s.model().end());
  const auto [olo, ohi] = std::minmax_element(s.obs().begin(), s.obs().end());
  const double lo = std::min(*mlo, *olo);
  const double hi = std::max(*mhi, *ohi);
  if (hi == lo) return 1.0;
  const double span = hi - lo;
  const auto bin_of = [&](double x) {
    const auto b = static_cast<long>(std::floor((x - lo) / span * bins));
    return static_cast<std::size_t>(std::clamp(b, 0L, static_cast<long>(bins) - 1));
  };
  std::vector<std::size_t> cm(static_cast<std::size_t>(bins), 0), co(cm);
  for (double x : s.model()) ++cm[bin_of(x)];
  for (double x : s.obs()) ++co[bin_of(x)];
  // Both series have the same length, so the overlap is a ratio of integer counts.
  std::size_t shared = 0;
  for (std::size_t b = 0; b < cm.size(); ++b) shared += std::min(cm[b], co[b]);
  return static_cast<double>(shared) / static_cast<double>(s.size());
}

ExtremeErrors extreme_errors(const PooledSample& s) {
  const auto [mlo, mhi] = std::minmax_element(s.model().begin(), s.model().end());
  const auto [olo, ohi] = std::minmax_element(s.obs().begin(), s.obs().end());
  return {std::fabs(*mhi - *ohi), std::fabs(*mlo - *olo)};
}

double sd_diff(const PooledSample& s) {
  const Moments m = moments(s);
  const double n = static_cast<double>(s.size());
  return std::fabs(std::sqrt(m.ss_m / n) - std::sqrt(m.ss_o / n));
}

MetricReport compute_report(const PooledSample& s, int bins) {
  MetricReport rep;
  rep.n = s.size();
  auto put = [&](MetricId id, std::optional<double> v) {
    const auto k = static_cast<std::size_t>(id);
    rep.valid[k] = v.has_value();
    rep.values[k] = v.value_or(0.0);
  };
  const auto r = pearson_r(s);
  put(MetricId::kBias, bias(s));
  put(MetricId::kRmse, rmse(s));
  put(MetricId::kR, r);
  put(MetricId::kR2, r ? std::optional<double>(*r * *r) : std::nullopt);
  put(MetricId::kNse, nse(s));
  put(MetricId::kKge, kge(s));
  put(MetricId::kPdfOverlap, pdf_overlap(s, bins));
  const auto ext = extreme_errors(s);
  put(MetricId::kTxxErr, ext.txx_err);
  put(MetricId::kTnnErr, ext.tnn_err);
  put(MetricId::kSdDiff, sd_diff(s));
  return rep;
}

PooledSample pool(const geogrid::DataCube& model, const geogrid::DataCube& obs,
                  const geogrid::ZoneMask& mask, geogrid::Zone zone, geogrid::Season season) {
  if (!(model.lat() == obs.lat()) || !(model.lon() == obs.lon())) {
    throw ValidationError("pool: model and obs grids differ");
  }
  if (!(mask.lat() == obs.lat()) || !(mask.lon() == obs.lon())) {
    throw ValidationError("pool: zone mask grid differs from the data grid");
  }
  std::map<geogrid::Date, std::size_t> obs_index;
  for (std::size_t t = 0; t < obs.nt(); ++t) obs_index.emplace(obs.time()[t], t);

  std::vector<std::size_t> cells;
  for (std::size_t c = 0; c < obs.cells(); ++c) {
    if (zone.contains(mask.codes()[c])) cells.push_back(c);
  }
  std::vector<double> mv, ov;
  const auto md = model.data();
  const auto od = obs.data();
  const std::size_t nc = obs.cells();
  for (std::size_t tm = 0; tm < model.nt(); ++tm) {
    const auto& d = model.time()[tm];
    if (!geogrid::season_contains(season, d.month)) continue;
    const auto it = obs_index.find(d);
    if (it == obs_index.end()) continue;
    const std::size_t to = it->second;
    for (std::size_t c : cells) {
      const double m = md[tm * nc + c];
      const double o = od[to * nc + c];
      if (model.is_fill(m) || obs.is_fill(o)) continue;
      mv.push_back(m);
      ov.push_back(o);
    }
  }
  if (mv.size() < 2) {
    throw ValidationError("pool: fewer than 2 valid pairs for zone " + geogrid::zone_name(zone) +
                          ", season " + std::string(geogrid::season_name(season)));
  }
  return PooledSample(std::move(mv), std::move(ov));
}

MetricReport full_report(const geogrid::DataCube& model, const geogrid::DataCube& obs,
                         const geogrid::ZoneMask& mask, geogrid::Zone zone,
                         geogrid::Season season, int bins) {
  return compute_report(pool(model, obs, mask, zone, season), bins);
}

}  // namespace climdown::metrics
